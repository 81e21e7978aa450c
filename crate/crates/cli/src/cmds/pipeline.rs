//! `pipeline`: generate several trajectory sets on one map, score each
//! against a reference set, and tabulate the results.
//!
//! The reference set comes from `--reference` or, absent that, from
//! lowest-cost street walks on the map. Each method draws `--count`
//! trajectories from its own derived seed, so adding or removing methods
//! never changes another method's rows. Outputs: `table.csv`, `table.json`,
//! `run.json`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use trajsynth_core::geodata::{load_map, load_trajectories, synth_trajectories};
use trajsynth_core::metrics::{evaluate_sets, SimilarityReport};
use trajsynth_core::mobility::{MobilityConfig, MobilityModel};
use trajsynth_core::rng::derive_seed;
use trajsynth_core::Error as CoreError;

use crate::cmds::{diffusion_trajectories, mobility_trajectories, Globals};
use crate::errors::CliError;
use crate::manifest::{load_config, write_manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The reference set compared against itself (sanity row).
    Reference,
    Rwp,
    Gm,
    Mrwp,
    Mgm,
    /// Samples from a denoiser checkpoint.
    Diffusion,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Reference => "reference",
            Method::Rwp => "rwp",
            Method::Gm => "gm",
            Method::Mrwp => "mrwp",
            Method::Mgm => "mgm",
            Method::Diffusion => "diffusion",
        }
    }

    /// Per-method seed stream tag; keeps each method's draws independent of
    /// which other methods run.
    fn seed_tag(self) -> u64 {
        match self {
            Method::Reference => 0,
            Method::Rwp => 10,
            Method::Gm => 11,
            Method::Mrwp => 12,
            Method::Mgm => 13,
            Method::Diffusion => 14,
        }
    }
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Street map JSON shared by every method.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Reference trajectory CSV; omitted, the reference is synthesized.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Methods to compare, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Trajectories per method.
    #[arg(long)]
    count: Option<usize>,
    /// Points per mobility-model trajectory.
    #[arg(long)]
    horizon: Option<usize>,
    /// EDR match threshold, meters.
    #[arg(long)]
    tau: Option<f64>,
    /// Sliced Wasserstein projection count.
    #[arg(long)]
    n_proj: Option<usize>,
    /// Denoiser checkpoint; required when methods include diffusion.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Raster-to-path threshold for diffusion samples.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub map: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub count: usize,
    pub horizon: usize,
    pub tau: f64,
    pub n_proj: usize,
    pub checkpoint: Option<PathBuf>,
    pub threshold: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            map: None,
            reference: None,
            methods: vec![Method::Rwp, Method::Gm, Method::Mrwp, Method::Mgm],
            count: 200,
            horizon: 200,
            tau: 20.0,
            n_proj: 500,
            checkpoint: None,
            threshold: 0.5,
        }
    }
}

/// One table row: a method name plus its similarity scores.
#[derive(Debug, Serialize)]
struct MethodRow<'a> {
    method: &'a str,
    #[serde(flatten)]
    report: &'a SimilarityReport,
}

pub fn run(args: &PipelineArgs, g: &Globals, out: &Path) -> Result<(), CliError> {
    let file = load_config::<PipelineParams>(g.config, "pipeline")?;
    let mut p = file.params.unwrap_or_default();
    if let Some(v) = &args.map {
        p.map = Some(v.clone());
    }
    if let Some(v) = &args.reference {
        p.reference = Some(v.clone());
    }
    if !args.methods.is_empty() {
        p.methods = args.methods.clone();
    }
    if let Some(v) = args.count {
        p.count = v;
    }
    if let Some(v) = args.horizon {
        p.horizon = v;
    }
    if let Some(v) = args.tau {
        p.tau = v;
    }
    if let Some(v) = args.n_proj {
        p.n_proj = v;
    }
    if let Some(v) = &args.checkpoint {
        p.checkpoint = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        p.threshold = v;
    }
    let seed = g.seed.or(file.seed).unwrap_or(0);

    let Some(map_path) = p.map.clone() else {
        return Err(CliError::usage("--map <FILE> is required"));
    };
    if p.methods.is_empty() {
        return Err(CliError::usage("--methods must name at least one method"));
    }
    if p.methods.contains(&Method::Diffusion) && p.checkpoint.is_none() {
        return Err(CliError::usage(
            "--checkpoint <FILE> is required when methods include diffusion",
        ));
    }
    if p.count == 0 {
        return Err(CoreError::validation("count must be positive").into());
    }
    write_manifest(out, "pipeline", seed, &p)?;

    let map = load_map(&map_path)?;
    let reference = match &p.reference {
        Some(path) => load_trajectories(path, &map.extent)?,
        None => synth_trajectories(&map, p.count, seed)?,
    };

    let mut reports: Vec<(&'static str, SimilarityReport)> = Vec::new();
    for &method in &p.methods {
        let method_seed = derive_seed(seed, method.seed_tag());
        let generated = match method {
            Method::Reference => reference.clone(),
            Method::Diffusion => diffusion_trajectories(
                p.checkpoint.as_ref().unwrap(),
                &map,
                p.count,
                p.threshold,
                method_seed,
            )?,
            Method::Rwp | Method::Gm | Method::Mrwp | Method::Mgm => {
                let model = match method {
                    Method::Rwp => MobilityModel::Rwp,
                    Method::Gm => MobilityModel::Gm,
                    Method::Mrwp => MobilityModel::MRwp,
                    _ => MobilityModel::MGm,
                };
                let cfg = MobilityConfig {
                    horizon_steps: p.horizon,
                    ..MobilityConfig::defaults(model)
                };
                mobility_trajectories(&cfg, &map, p.count, method_seed)?
            }
        };
        let report = evaluate_sets(&generated, &reference, &map.extent, p.tau, p.n_proj, seed)?;
        reports.push((method.name(), report));
    }

    let mut csv = String::from("method,edr_mean,dtw_mean,cosine,sliced_wasserstein\n");
    for (name, r) in &reports {
        csv.push_str(&format!(
            "{name},{},{},{},{}\n",
            r.edr_mean, r.dtw_mean, r.cosine, r.sliced_wasserstein
        ));
    }
    std::fs::write(out.join("table.csv"), csv)?;

    let rows: Vec<MethodRow> = reports
        .iter()
        .map(|(name, report)| MethodRow {
            method: name,
            report,
        })
        .collect();
    crate::cmds::write_json(&out.join("table.json"), &rows)?;
    Ok(())
}
