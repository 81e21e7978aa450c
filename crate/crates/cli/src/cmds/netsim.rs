//! `netsim`: run multi-cell network episodes over moving users.
//!
//! Users follow trajectories from a file, a mobility model, or a trained
//! denoiser; a policy (max-SINR, load-aware greedy, or an external process)
//! associates each user to a (station, band) every step. Episode `e` uses
//! `derive_seed(seed, e)` for its shadow fading and, for generated sources,
//! its trajectories. Outputs: `kpis_ep<e>.csv` per episode, `summary.json`
//! (array of per-episode summaries), `run.json`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{load_map, load_trajectories};
use trajsynth_core::mobility::{MobilityConfig, MobilityModel};
use trajsynth_core::netsim::{
    run_episode, AssociationPolicy, EpisodeConfig, EpisodeSummary, ExternPolicy,
    LoadAwareGreedyPolicy, MaxSinrPolicy,
};
use trajsynth_core::rng::derive_seed;
use trajsynth_core::{StreetMap, Trajectory};

use crate::cmds::{diffusion_trajectories, mobility_trajectories, write_json, Globals};
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajSource {
    /// Load trajectories from --trajectories.
    File,
    Rwp,
    Gm,
    Mrwp,
    Mgm,
    /// Sample from a denoiser checkpoint.
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Highest candidate SINR, ties to the lowest (station, band).
    Maxsinr,
    /// Sequential assignment by marginal equal-share rate.
    Greedy,
    /// Child process speaking line-delimited JSON (--policy-cmd).
    Extern,
}

#[derive(Debug, Args)]
pub struct NetsimArgs {
    /// Street map JSON; defines the playground and, for mapped models, the
    /// street mask.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Where user trajectories come from.
    #[arg(long, value_enum)]
    traj_source: Option<TrajSource>,
    /// Trajectory CSV; required with --traj-source file.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    /// Denoiser checkpoint; required with --traj-source diffusion.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Raster-to-path threshold for diffusion samples.
    #[arg(long)]
    threshold: Option<f64>,
    /// Association policy.
    #[arg(long, value_enum)]
    policy: Option<PolicyKind>,
    /// External policy command and arguments; required with --policy extern.
    #[arg(long, num_args = 1..)]
    policy_cmd: Vec<String>,
    /// Number of episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Users per episode.
    #[arg(long)]
    users: Option<usize>,
    /// Steps per episode.
    #[arg(long)]
    horizon: Option<usize>,
    /// Station lattice nearest-neighbor distance, meters.
    #[arg(long)]
    spacing: Option<f64>,
    /// Shadow-fading standard deviation, dB (0 disables shadowing).
    #[arg(long)]
    sigma: Option<f64>,
    /// Shadow-fading decorrelation distance, meters.
    #[arg(long)]
    decorr: Option<f64>,
    /// Sinusoid components per shadow field.
    #[arg(long)]
    n_sinusoids: Option<usize>,
    /// Base station antenna height, meters.
    #[arg(long)]
    bs_height: Option<f64>,
    /// User terminal height, meters.
    #[arg(long)]
    ut_height: Option<f64>,
    /// Seconds per simulation step.
    #[arg(long)]
    step_seconds: Option<f64>,
    /// Handover penalty weight in the per-step reward.
    #[arg(long)]
    handover_lambda: Option<f64>,
    /// Logarithm base of the rate utility.
    #[arg(long)]
    log_base: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetsimParams {
    pub map: Option<PathBuf>,
    pub traj_source: TrajSource,
    pub trajectories: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threshold: f64,
    pub policy: PolicyKind,
    pub policy_cmd: Vec<String>,
    pub episodes: usize,
    pub episode: EpisodeConfig,
}

impl Default for NetsimParams {
    fn default() -> Self {
        NetsimParams {
            map: None,
            traj_source: TrajSource::Rwp,
            trajectories: None,
            checkpoint: None,
            threshold: 0.5,
            policy: PolicyKind::Maxsinr,
            policy_cmd: Vec::new(),
            episodes: 1,
            episode: EpisodeConfig::default(),
        }
    }
}

pub fn run(args: &NetsimArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<NetsimParams>(g.config, "netsim")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = &args.map {
        p.map = Some(v.clone());
    }
    if let Some(v) = args.traj_source {
        p.traj_source = v;
    }
    if let Some(v) = &args.trajectories {
        p.trajectories = Some(v.clone());
    }
    if let Some(v) = &args.checkpoint {
        p.checkpoint = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        p.threshold = v;
    }
    if let Some(v) = args.policy {
        p.policy = v;
    }
    if !args.policy_cmd.is_empty() {
        p.policy_cmd = args.policy_cmd.clone();
    }
    if let Some(v) = args.episodes {
        p.episodes = v;
    }
    if let Some(v) = args.users {
        p.episode.user_count = v;
    }
    if let Some(v) = args.horizon {
        p.episode.horizon = v;
    }
    if let Some(v) = args.spacing {
        p.episode.spacing_m = v;
    }
    if let Some(v) = args.sigma {
        p.episode.sigma_db = v;
    }
    if let Some(v) = args.decorr {
        p.episode.decorr_m = v;
    }
    if let Some(v) = args.n_sinusoids {
        p.episode.n_sinusoids = v;
    }
    if let Some(v) = args.bs_height {
        p.episode.bs_height_m = v;
    }
    if let Some(v) = args.ut_height {
        p.episode.ut_height_m = v;
    }
    if let Some(v) = args.step_seconds {
        p.episode.step_seconds = v;
    }
    if let Some(v) = args.handover_lambda {
        p.episode.handover_lambda = v;
    }
    if let Some(v) = args.log_base {
        p.episode.utility_log_base = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    let Some(map_path) = p.map.clone() else {
        return Err(CliError::usage("--map <FILE> is required"));
    };
    if p.traj_source == TrajSource::File && p.trajectories.is_none() {
        return Err(CliError::usage(
            "--trajectories <FILE> is required with --traj-source file",
        ));
    }
    if p.traj_source == TrajSource::Diffusion && p.checkpoint.is_none() {
        return Err(CliError::usage(
            "--checkpoint <FILE> is required with --traj-source diffusion",
        ));
    }
    if p.policy == PolicyKind::Extern && p.policy_cmd.is_empty() {
        return Err(CliError::usage(
            "--policy-cmd <CMD>... is required with --policy extern",
        ));
    }
    if p.episodes == 0 {
        return Err(trajsynth_core::Error::validation("episode count must be positive").into());
    }
    write_manifest(out, "netsim", seed, &p)?;

    let map = load_map(&map_path)?;
    let file_trajectories = match (&p.traj_source, &p.trajectories) {
        (TrajSource::File, Some(path)) => Some(load_trajectories(path, &map.extent)?),
        _ => None,
    };

    let mut policy: Box<dyn AssociationPolicy> = match p.policy {
        PolicyKind::Maxsinr => Box::new(MaxSinrPolicy),
        PolicyKind::Greedy => Box::new(LoadAwareGreedyPolicy),
        PolicyKind::Extern => Box::new(ExternPolicy::spawn(
            &p.policy_cmd[0],
            &p.policy_cmd[1..],
        )?),
    };

    let mut summaries: Vec<EpisodeSummary> = Vec::with_capacity(p.episodes);
    for e in 0..p.episodes {
        let ep_seed = derive_seed(seed, e as u64);
        let trajectories = episode_trajectories(&p, &map, file_trajectories.as_deref(), ep_seed)?;
        let result = run_episode(
            &trajectories,
            policy.as_mut(),
            &p.episode,
            &map.extent,
            ep_seed,
        )?;
        result.write_csv(&out.join(format!("kpis_ep{e}.csv")))?;
        summaries.push(result.summary);
    }
    write_json(&out.join("summary.json"), &summaries)?;
    Ok(())
}

/// User trajectories for one episode. File sources reuse the loaded set every
/// episode (the shadow field still differs); generated sources draw a fresh
/// set from the episode seed.
fn episode_trajectories(
    p: &NetsimParams,
    map: &StreetMap,
    from_file: Option<&[Trajectory]>,
    ep_seed: u64,
) -> Result<Vec<Trajectory>, CliError> {
    let model = match p.traj_source {
        TrajSource::File => return Ok(from_file.unwrap().to_vec()),
        TrajSource::Diffusion => {
            return diffusion_trajectories(
                p.checkpoint.as_ref().unwrap(),
                map,
                p.episode.user_count,
                p.threshold,
                ep_seed,
            );
        }
        TrajSource::Rwp => MobilityModel::Rwp,
        TrajSource::Gm => MobilityModel::Gm,
        TrajSource::Mrwp => MobilityModel::MRwp,
        TrajSource::Mgm => MobilityModel::MGm,
    };
    let cfg = MobilityConfig {
        horizon_steps: p.episode.horizon,
        step_seconds: p.episode.step_seconds,
        ..MobilityConfig::defaults(model)
    };
    mobility_trajectories(&cfg, map, p.episode.user_count, ep_seed)
}
