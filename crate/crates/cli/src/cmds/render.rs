//! `render`: turn maps, trajectory sets, or raw heatmap matrices into PNGs.
//!
//! Three modes, selected by which inputs are given:
//! - `--map` alone renders the street raster (major red, minor blue) to
//!   `map.png`;
//! - `--trajectories` with `--map` renders the occupancy heatmap of the set,
//!   normalized to its maximum, to `heatmap.png`;
//! - `--heatmap` alone renders a CSV matrix of non-negative values (rows top
//!   to bottom, square, at least 8×8), normalized to its maximum, to
//!   `heatmap.png`.
//!
//! All values are quantized on a fixed 256-level ramp; an all-zero input
//! stays all-zero and renders pure black. Rendering is pure, so rerunning
//! produces byte-identical files.

use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{load_map, load_trajectories};
use trajsynth_core::metrics::heatmap_from;
use trajsynth_core::raster::{export_png, rasterize_map};
use trajsynth_core::{Error as CoreError, Extent, RasterGrid};

use crate::cmds::Globals;
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Street map JSON: render it, or supply the extent for --trajectories.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Trajectory CSV to render as an occupancy heatmap (needs --map).
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// CSV matrix of non-negative values to render directly.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    pub map: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub heatmap: Option<PathBuf>,
}

pub fn run(args: &RenderArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<RenderParams>(g.config, "render")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = &args.map {
        p.map = Some(v.clone());
    }
    if let Some(v) = &args.trajectories {
        p.trajectories = Some(v.clone());
    }
    if let Some(v) = &args.heatmap {
        p.heatmap = Some(v.clone());
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    enum Mode {
        Map(PathBuf),
        Trajectories(PathBuf, PathBuf),
        Heatmap(PathBuf),
    }
    let mode = match (p.map.clone(), p.trajectories.clone(), p.heatmap.clone()) {
        (Some(m), None, None) => Mode::Map(m),
        (Some(m), Some(t), None) => Mode::Trajectories(m, t),
        (None, None, Some(h)) => Mode::Heatmap(h),
        (None, Some(_), None) => {
            return Err(CliError::usage(
                "--trajectories needs --map for the extent",
            ));
        }
        _ => {
            return Err(CliError::usage(
                "give either --map, --map with --trajectories, or --heatmap",
            ));
        }
    };
    write_manifest(out, "render", seed, &p)?;

    match mode {
        Mode::Map(map_path) => {
            let map = load_map(&map_path)?;
            export_png(&rasterize_map(&map)?, &out.join("map.png"))?;
        }
        Mode::Trajectories(map_path, traj_path) => {
            let map = load_map(&map_path)?;
            let trajectories = load_trajectories(&traj_path, &map.extent)?;
            let hm = heatmap_from(&trajectories, &map.extent)?;
            let grid = normalized_grid(map.extent, hm.data)?;
            export_png(&grid, &out.join("heatmap.png"))?;
        }
        Mode::Heatmap(csv_path) => {
            let data = read_matrix(&csv_path)?;
            let n = data.shape()[1];
            // The matrix has no physical extent; a unit-cell square stands in.
            let extent = Extent::new(0.0, 0.0, n as f64, 1.0)?;
            let grid = normalized_grid(extent, data)?;
            export_png(&grid, &out.join("heatmap.png"))?;
        }
    }
    Ok(())
}

/// Scales a `(j, i)`-indexed field to [0, 1] by its maximum (all-zero stays
/// all-zero) and wraps it as a one-channel raster.
fn normalized_grid(
    extent: Extent,
    mut data: ndarray::Array2<f64>,
) -> Result<RasterGrid, CliError> {
    let max = data.iter().cloned().fold(0.0_f64, f64::max);
    if max > 0.0 {
        data.mapv_inplace(|v| v / max);
    }
    let n = data.shape()[0];
    let mut cube = Array3::zeros((1, n, n));
    cube.index_axis_mut(ndarray::Axis(0), 0).assign(&data);
    Ok(RasterGrid::from_array(extent, cube)?)
}

/// Parses a square CSV matrix of finite non-negative values. CSV rows run
/// top to bottom (north to south), so row `r` lands at `j = n - 1 - r`.
fn read_matrix(path: &Path) -> Result<ndarray::Array2<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    CoreError::parse(format!(
                        "heatmap line {}: `{}` is not a number",
                        line_no + 1,
                        cell.trim()
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n < 8 {
        return Err(CoreError::validation(format!(
            "heatmap matrix must be at least 8×8, got {n} rows"
        ))
        .into());
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CoreError::validation(format!(
                "heatmap matrix must be square: {n} rows but row {} has {} values",
                r + 1,
                row.len()
            ))
            .into());
        }
    }
    let mut data = ndarray::Array2::zeros((n, n));
    for (r, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::validation(format!(
                    "heatmap values must be finite and non-negative, got {v}"
                ))
                .into());
            }
            data[(n - 1 - r, i)] = v;
        }
    }
    Ok(data)
}
