//! Subcommand implementations and the helpers they share.

pub mod evaluate;
pub mod gen_map;
pub mod gen_traj;
pub mod netsim;
pub mod pipeline;
pub mod render;
pub mod train;

use std::path::Path;

use trajsynth_core::diffusion::{generate, load_checkpoint};
use trajsynth_core::mobility::{gen_gm, gen_m_gm, gen_m_rwp, gen_rwp, MobilityConfig, MobilityModel};
use trajsynth_core::raster::{image_to_trajectory, rasterize_map, street_mask};
use trajsynth_core::rng::derive_seed;
use trajsynth_core::{StreetMap, Trajectory};

use crate::errors::CliError;

/// Global flags shared by every subcommand.
pub struct Globals<'a> {
    pub seed: Option<u64>,
    pub config: Option<&'a Path>,
}

/// Draws `count` trajectories from a mobility model, one derived seed per
/// trajectory: trajectory `i` uses `derive_seed(seed, i)`. Mapped models get
/// the street mask rasterized from `map`; free models use its extent.
pub fn mobility_trajectories(
    cfg: &MobilityConfig,
    map: &StreetMap,
    count: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, CliError> {
    cfg.validate()?;
    let mask = match cfg.model {
        MobilityModel::MRwp | MobilityModel::MGm => Some(street_mask(&rasterize_map(map)?)?),
        MobilityModel::Rwp | MobilityModel::Gm => None,
    };
    (0..count)
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            match cfg.model {
                MobilityModel::Rwp => gen_rwp(cfg, &map.extent, s),
                MobilityModel::Gm => gen_gm(cfg, &map.extent, s),
                MobilityModel::MRwp => gen_m_rwp(cfg, mask.as_ref().unwrap(), s),
                MobilityModel::MGm => gen_m_gm(cfg, mask.as_ref().unwrap(), s),
            }
            .map_err(CliError::from)
        })
        .collect()
}

/// Samples `count` trajectories from a trained denoiser checkpoint,
/// conditioning on `map`, then walks each sampled raster into a point
/// sequence at `threshold`.
pub fn diffusion_trajectories(
    checkpoint: &Path,
    map: &StreetMap,
    count: usize,
    threshold: f64,
    seed: u64,
) -> Result<Vec<Trajectory>, CliError> {
    let (params, schedule) = load_checkpoint(checkpoint)?;
    let raster = rasterize_map(map)?;
    let samples = generate(&params, &raster, &schedule, count, seed)?;
    samples
        .iter()
        .map(|img| image_to_trajectory(img, threshold, &map.extent).map_err(CliError::from))
        .collect()
}

/// Writes pretty-printed JSON with a trailing newline; the fixed formatting
/// keeps reruns byte-identical.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
