//! `evaluate`: score a generated trajectory set against a reference set.
//!
//! Outputs: `report.json` with best-match EDR/DTW means and the two
//! heatmap-level scores (cosine, sliced Wasserstein), plus `run.json`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{load_map, load_trajectories};
use trajsynth_core::metrics::evaluate_sets;

use crate::cmds::{write_json, Globals};
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generated trajectory CSV.
    #[arg(long)]
    generated: Option<PathBuf>,
    /// Reference trajectory CSV.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Street map JSON defining the shared extent.
    #[arg(long)]
    map: Option<PathBuf>,
    /// EDR match threshold, meters.
    #[arg(long)]
    tau: Option<f64>,
    /// Sliced Wasserstein projection count.
    #[arg(long)]
    n_proj: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateParams {
    pub generated: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub tau: f64,
    pub n_proj: usize,
}

impl Default for EvaluateParams {
    fn default() -> Self {
        EvaluateParams {
            generated: None,
            reference: None,
            map: None,
            tau: 20.0,
            n_proj: 500,
        }
    }
}

pub fn run(args: &EvaluateArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<EvaluateParams>(g.config, "evaluate")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = &args.generated {
        p.generated = Some(v.clone());
    }
    if let Some(v) = &args.reference {
        p.reference = Some(v.clone());
    }
    if let Some(v) = &args.map {
        p.map = Some(v.clone());
    }
    if let Some(v) = args.tau {
        p.tau = v;
    }
    if let Some(v) = args.n_proj {
        p.n_proj = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    let (Some(gen_path), Some(ref_path), Some(map_path)) =
        (p.generated.clone(), p.reference.clone(), p.map.clone())
    else {
        return Err(CliError::usage(
            "--generated, --reference, and --map are all required",
        ));
    };
    write_manifest(out, "evaluate", seed, &p)?;

    let map = load_map(&map_path)?;
    let generated = load_trajectories(&gen_path, &map.extent)?;
    let reference = load_trajectories(&ref_path, &map.extent)?;
    let report = evaluate_sets(&generated, &reference, &map.extent, p.tau, p.n_proj, seed)?;
    write_json(&out.join("report.json"), &report)?;
    Ok(())
}
