//! `train`: fit the conditional denoiser on (map, trajectories) pairs.
//!
//! `--map` and `--trajectories` repeat and zip positionally into dataset
//! entries; all maps must share one raster size. Outputs: `checkpoint.bin`,
//! `loss.csv`, `run.json`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use trajsynth_core::diffusion::{
    make_schedule, save_checkpoint, train, DenoiserParams, NetConfig, OptConfig,
};
use trajsynth_core::geodata::{load_map, load_trajectories, DatasetEntry};
use trajsynth_core::{Dataset, SplitTag};

use crate::cmds::Globals;
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Street map JSON; repeat to train on several maps.
    #[arg(long = "map")]
    maps: Vec<PathBuf>,
    /// Trajectory CSV for the matching --map, in the same order.
    #[arg(long = "trajectories")]
    trajectories: Vec<PathBuf>,
    /// Number of Adam updates.
    #[arg(long)]
    steps: Option<usize>,
    /// Diffusion timesteps T.
    #[arg(long)]
    t_steps: Option<usize>,
    /// Noise variance at t = 1.
    #[arg(long)]
    beta_start: Option<f64>,
    /// Noise variance at t = T.
    #[arg(long)]
    beta_end: Option<f64>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Training pairs per step.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Denoiser resolution levels.
    #[arg(long)]
    depth: Option<usize>,
    /// Denoiser channels at full resolution.
    #[arg(long)]
    base_width: Option<usize>,
    /// Time-embedding width.
    #[arg(long)]
    time_dim: Option<usize>,
    /// Group-normalization group count.
    #[arg(long)]
    groups: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub maps: Vec<PathBuf>,
    pub trajectories: Vec<PathBuf>,
    pub steps: usize,
    pub t_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub depth: usize,
    pub base_width: usize,
    pub time_dim: usize,
    pub groups: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let net = NetConfig::tiny();
        let opt = OptConfig::default();
        TrainParams {
            maps: Vec::new(),
            trajectories: Vec::new(),
            steps: 200,
            t_steps: 100,
            beta_start: 1e-4,
            beta_end: 0.2,
            lr: opt.lr,
            batch_size: opt.batch_size,
            depth: net.depth,
            base_width: net.base_width,
            time_dim: net.time_dim,
            groups: net.groups,
        }
    }
}

pub fn run(args: &TrainArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<TrainParams>(g.config, "train")?;
    let mut p = file.params.unwrap_or_default();
    if !args.maps.is_empty() {
        p.maps = args.maps.clone();
    }
    if !args.trajectories.is_empty() {
        p.trajectories = args.trajectories.clone();
    }
    if let Some(v) = args.steps {
        p.steps = v;
    }
    if let Some(v) = args.t_steps {
        p.t_steps = v;
    }
    if let Some(v) = args.beta_start {
        p.beta_start = v;
    }
    if let Some(v) = args.beta_end {
        p.beta_end = v;
    }
    if let Some(v) = args.lr {
        p.lr = v;
    }
    if let Some(v) = args.batch_size {
        p.batch_size = v;
    }
    if let Some(v) = args.depth {
        p.depth = v;
    }
    if let Some(v) = args.base_width {
        p.base_width = v;
    }
    if let Some(v) = args.time_dim {
        p.time_dim = v;
    }
    if let Some(v) = args.groups {
        p.groups = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    if p.maps.is_empty() {
        return Err(CliError::usage("at least one --map <FILE> is required"));
    }
    if p.maps.len() != p.trajectories.len() {
        return Err(CliError::usage(format!(
            "{} --map files but {} --trajectories files; they pair up one-to-one",
            p.maps.len(),
            p.trajectories.len()
        )));
    }
    write_manifest(out, "train", seed, &p)?;

    let mut entries = Vec::with_capacity(p.maps.len());
    for (map_path, traj_path) in p.maps.iter().zip(&p.trajectories) {
        let map = load_map(map_path)?;
        let trajectories = load_trajectories(traj_path, &map.extent)?;
        entries.push(DatasetEntry { map, trajectories });
    }
    let dataset = Dataset {
        entries,
        split_tag: SplitTag::Train,
    };

    let schedule = make_schedule(p.t_steps, p.beta_start, p.beta_end)?;
    let net = NetConfig {
        depth: p.depth,
        base_width: p.base_width,
        time_dim: p.time_dim,
        groups: p.groups,
    };
    let opt = OptConfig {
        lr: p.lr,
        batch_size: p.batch_size,
        ..OptConfig::default()
    };
    let init = DenoiserParams::init(net, seed)?;
    let (trained, log) = train(init, &dataset, &schedule, &opt, p.steps, seed)?;

    save_checkpoint(&out.join("checkpoint.bin"), &trained, &schedule)?;
    log.write_csv(&out.join("loss.csv"))?;
    Ok(())
}
