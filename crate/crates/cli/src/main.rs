//! Command-line front end for street-map-conditioned trajectory synthesis:
//! dataset generation, denoiser training and sampling, baseline mobility
//! models, similarity evaluation, network simulation, and rendering.
//!
//! Every subcommand takes `--out` (required), `--seed`, `--threads`, and
//! `--config`, resolves its parameters (defaults < config file < flags), and
//! writes the resolved result to `<out>/run.json` so the run can be
//! reproduced bit for bit with `--config <out>/run.json`.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 runtime.

mod cmds;
mod errors;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use cmds::Globals;
use errors::CliError;

#[derive(Parser)]
#[command(name = "trajsynth", version, about, propagate_version = true)]
struct Cli {
    /// Base seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections; defaults to the logical core
    /// count. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, created if missing. Every run writes run.json here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON parameter file — either a previous run.json or a bare parameter
    /// object. Explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a street map and render it.
    GenMap(cmds::gen_map::GenMapArgs),
    /// Generate trajectories on a map with a mobility model, street walks,
    /// or a trained denoiser.
    GenTraj(cmds::gen_traj::GenTrajArgs),
    /// Train the conditional denoiser on (map, trajectories) pairs.
    Train(cmds::train::TrainArgs),
    /// Score a generated trajectory set against a reference set.
    Evaluate(cmds::evaluate::EvaluateArgs),
    /// Run multi-cell network episodes over moving users.
    Netsim(cmds::netsim::NetsimArgs),
    /// Render a map, a trajectory heatmap, or a raw heatmap matrix to PNG.
    Render(cmds::render::RenderArgs),
    /// Generate trajectory sets with several methods and tabulate their
    /// similarity to a reference set.
    Pipeline(cmds::pipeline::PipelineArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        // A pool may already exist when commands run in-process during
        // tests; the global pool is then left as is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::usage("--out <DIR> is required"))?;
    std::fs::create_dir_all(out)?;
    let globals = Globals {
        seed: cli.seed,
        config: cli.config.as_deref(),
    };
    match &cli.command {
        Command::GenMap(args) => cmds::gen_map::run(args, &globals, out),
        Command::GenTraj(args) => cmds::gen_traj::run(args, &globals, out),
        Command::Train(args) => cmds::train::run(args, &globals, out),
        Command::Evaluate(args) => cmds::evaluate::run(args, &globals, out),
        Command::Netsim(args) => cmds::netsim::run(args, &globals, out),
        Command::Render(args) => cmds::render::run(args, &globals, out),
        Command::Pipeline(args) => cmds::pipeline::run(args, &globals, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
