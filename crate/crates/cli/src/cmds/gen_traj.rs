//! `gen-traj`: generate trajectories on a street map.
//!
//! Models: `synth` (lowest-cost street walks between random street cells),
//! the four mobility baselines, or `diffusion` (sampling a trained
//! denoiser). Outputs: `trajectories.csv`, `run.json`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{load_map, save_trajectories, synth_trajectories};
use trajsynth_core::mobility::{MobilityConfig, MobilityModel};

use crate::cmds::{diffusion_trajectories, mobility_trajectories, Globals};
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajModel {
    /// Lowest-cost walks along the street graph.
    Synth,
    /// Random waypoint over the full extent.
    Rwp,
    /// Gauss-Markov over the full extent.
    Gm,
    /// Random waypoint restricted to streets.
    Mrwp,
    /// Gauss-Markov restricted to streets.
    Mgm,
    /// Samples from a trained denoiser checkpoint.
    Diffusion,
}

#[derive(Debug, Args)]
pub struct GenTrajArgs {
    /// Street map JSON produced by gen-map.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Trajectory generator.
    #[arg(long, value_enum)]
    model: Option<TrajModel>,
    /// Number of trajectories.
    #[arg(long)]
    count: Option<usize>,
    /// Points per trajectory (mobility models only).
    #[arg(long)]
    horizon: Option<usize>,
    /// Denoiser checkpoint; required for --model diffusion.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Raster-to-path threshold for diffusion samples.
    #[arg(long)]
    threshold: Option<f64>,
    /// Lower waypoint speed bound, m/s.
    #[arg(long)]
    speed_min: Option<f64>,
    /// Upper waypoint speed bound, m/s.
    #[arg(long)]
    speed_max: Option<f64>,
    /// Gauss-Markov memory level in [0, 1].
    #[arg(long)]
    gm_alpha: Option<f64>,
    /// Gauss-Markov mean speed, m/s.
    #[arg(long)]
    gm_mean_speed: Option<f64>,
    /// Gauss-Markov speed standard deviation, m/s.
    #[arg(long)]
    gm_sigma: Option<f64>,
    /// Gauss-Markov heading standard deviation, radians.
    #[arg(long)]
    gm_sigma_dir: Option<f64>,
    /// Simulation step length, seconds.
    #[arg(long)]
    step_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenTrajParams {
    pub map: Option<PathBuf>,
    pub model: TrajModel,
    pub count: usize,
    pub horizon: usize,
    pub checkpoint: Option<PathBuf>,
    pub threshold: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub gm_alpha: f64,
    pub gm_mean_speed: f64,
    pub gm_sigma: f64,
    pub gm_sigma_dir: f64,
    pub step_seconds: f64,
}

impl Default for GenTrajParams {
    fn default() -> Self {
        let m = MobilityConfig::defaults(MobilityModel::Rwp);
        GenTrajParams {
            map: None,
            model: TrajModel::Rwp,
            count: 100,
            horizon: m.horizon_steps,
            checkpoint: None,
            threshold: 0.5,
            speed_min: m.speed_min,
            speed_max: m.speed_max,
            gm_alpha: m.gm_alpha,
            gm_mean_speed: m.gm_mean_speed,
            gm_sigma: m.gm_sigma,
            gm_sigma_dir: m.gm_sigma_dir,
            step_seconds: m.step_seconds,
        }
    }
}

impl GenTrajParams {
    /// Mobility configuration for one of the four baseline models.
    pub fn mobility_config(&self, model: MobilityModel) -> MobilityConfig {
        MobilityConfig {
            model,
            speed_min: self.speed_min,
            speed_max: self.speed_max,
            gm_alpha: self.gm_alpha,
            gm_mean_speed: self.gm_mean_speed,
            gm_sigma: self.gm_sigma,
            gm_sigma_dir: self.gm_sigma_dir,
            step_seconds: self.step_seconds,
            horizon_steps: self.horizon,
        }
    }
}

pub fn run(args: &GenTrajArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<GenTrajParams>(g.config, "gen-traj")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = &args.map {
        p.map = Some(v.clone());
    }
    if let Some(v) = args.model {
        p.model = v;
    }
    if let Some(v) = args.count {
        p.count = v;
    }
    if let Some(v) = args.horizon {
        p.horizon = v;
    }
    if let Some(v) = &args.checkpoint {
        p.checkpoint = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        p.threshold = v;
    }
    if let Some(v) = args.speed_min {
        p.speed_min = v;
    }
    if let Some(v) = args.speed_max {
        p.speed_max = v;
    }
    if let Some(v) = args.gm_alpha {
        p.gm_alpha = v;
    }
    if let Some(v) = args.gm_mean_speed {
        p.gm_mean_speed = v;
    }
    if let Some(v) = args.gm_sigma {
        p.gm_sigma = v;
    }
    if let Some(v) = args.gm_sigma_dir {
        p.gm_sigma_dir = v;
    }
    if let Some(v) = args.step_seconds {
        p.step_seconds = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    let Some(map_path) = p.map.clone() else {
        return Err(CliError::usage("--map <FILE> is required"));
    };
    if p.model == TrajModel::Diffusion && p.checkpoint.is_none() {
        return Err(CliError::usage(
            "--checkpoint <FILE> is required with --model diffusion",
        ));
    }
    write_manifest(out, "gen-traj", seed, &p)?;

    let map = load_map(&map_path)?;
    let trajectories = match p.model {
        TrajModel::Synth => synth_trajectories(&map, p.count, seed)?,
        TrajModel::Rwp => {
            mobility_trajectories(&p.mobility_config(MobilityModel::Rwp), &map, p.count, seed)?
        }
        TrajModel::Gm => {
            mobility_trajectories(&p.mobility_config(MobilityModel::Gm), &map, p.count, seed)?
        }
        TrajModel::Mrwp => {
            mobility_trajectories(&p.mobility_config(MobilityModel::MRwp), &map, p.count, seed)?
        }
        TrajModel::Mgm => {
            mobility_trajectories(&p.mobility_config(MobilityModel::MGm), &map, p.count, seed)?
        }
        TrajModel::Diffusion => diffusion_trajectories(
            p.checkpoint.as_ref().unwrap(),
            &map,
            p.count,
            p.threshold,
            seed,
        )?,
    };
    save_trajectories(&trajectories, &out.join("trajectories.csv"))?;
    Ok(())
}
