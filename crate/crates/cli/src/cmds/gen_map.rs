//! `gen-map`: synthesize a street map and render it.
//!
//! Outputs: `map.json` (road network), `map.png` (major roads red, minor
//! roads blue), `run.json`.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{save_map, synth_map};
use trajsynth_core::raster::{export_png, rasterize_map};
use trajsynth_core::Extent;

use crate::cmds::Globals;
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Args)]
pub struct GenMapArgs {
    /// Square map side length, meters.
    #[arg(long)]
    side: Option<f64>,
    /// Raster cell size, meters; side must be an integer multiple.
    #[arg(long)]
    cell: Option<f64>,
    /// Street grid pitch, meters.
    #[arg(long)]
    pitch: Option<f64>,
    /// Number of diagonal avenue chords.
    #[arg(long)]
    diagonals: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenMapParams {
    pub side: f64,
    pub cell: f64,
    pub pitch: f64,
    pub diagonals: usize,
}

impl Default for GenMapParams {
    fn default() -> Self {
        GenMapParams {
            side: 1920.0,
            cell: 10.0,
            pitch: 240.0,
            diagonals: 3,
        }
    }
}

pub fn run(args: &GenMapArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<GenMapParams>(g.config, "gen-map")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = args.side {
        p.side = v;
    }
    if let Some(v) = args.cell {
        p.cell = v;
    }
    if let Some(v) = args.pitch {
        p.pitch = v;
    }
    if let Some(v) = args.diagonals {
        p.diagonals = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);
    write_manifest(out, "gen-map", seed, &p)?;

    let extent = Extent::new(0.0, 0.0, p.side, p.cell)?;
    let map = synth_map(seed, extent, p.pitch, p.diagonals)?;
    save_map(&map, &out.join("map.json"))?;
    export_png(&rasterize_map(&map)?, &out.join("map.png"))?;
    Ok(())
}
