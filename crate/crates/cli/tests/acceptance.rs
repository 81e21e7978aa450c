//! Acceptance gate, reproducibility criterion: every command's `run.json`
//! manifest must rerun to byte-identical primary outputs.
//!
//! One full workflow is chained through all seven subcommands; each output
//! directory's manifest is then replayed into a fresh directory with no
//! other flags, and every primary artifact is compared byte for byte.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use tempfile::tempdir;

fn run(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_trajsynth"))
        .args(args)
        .output()
        .expect("spawn trajsynth");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Replays `dir/run.json` into a sibling directory and asserts each named
/// output is byte-identical to the original.
fn rerun_matches(command: &str, dir: &Path, files: &[&str]) {
    let replay = dir.with_file_name(format!(
        "{}-replay",
        dir.file_name().unwrap().to_string_lossy()
    ));
    run(&[
        command,
        "--config",
        dir.join("run.json").to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
    ]);
    for file in files {
        let a = std::fs::read(dir.join(file))
            .unwrap_or_else(|e| panic!("read {}/{file}: {e}", dir.display()));
        let b = std::fs::read(replay.join(file))
            .unwrap_or_else(|e| panic!("read {}/{file}: {e}", replay.display()));
        assert_eq!(
            a, b,
            "{command}: {file} is not byte-identical when rerun from run.json"
        );
    }
}

#[test]
fn acceptance_manifest_reruns() {
    let t0 = Instant::now();
    let tmp = tempdir().unwrap();
    let dir = |name: &str| -> PathBuf { tmp.path().join(name) };
    let s = |p: &Path| p.to_str().unwrap().to_string();

    // gen-map
    let map_dir = dir("map");
    run(&["gen-map", "--side", "480", "--seed", "5", "--out", &s(&map_dir)]);
    let map = s(&map_dir.join("map.json"));

    // gen-traj: a street-bound set and a free-space reference set.
    let mrwp_dir = dir("traj-mrwp");
    run(&[
        "gen-traj", "--map", &map, "--model", "mrwp", "--count", "8", "--horizon", "40",
        "--seed", "6", "--out", &s(&mrwp_dir),
    ]);
    let rwp_dir = dir("traj-rwp");
    run(&[
        "gen-traj", "--map", &map, "--model", "rwp", "--count", "8", "--horizon", "40",
        "--seed", "7", "--out", &s(&rwp_dir),
    ]);
    let mrwp_csv = s(&mrwp_dir.join("trajectories.csv"));
    let rwp_csv = s(&rwp_dir.join("trajectories.csv"));

    // train
    let train_dir = dir("train");
    run(&[
        "train", "--map", &map, "--trajectories", &mrwp_csv, "--steps", "4",
        "--batch-size", "4", "--seed", "8", "--out", &s(&train_dir),
    ]);

    // gen-traj from the trained checkpoint.
    let sample_dir = dir("traj-diff");
    run(&[
        "gen-traj", "--map", &map, "--model", "diffusion", "--checkpoint",
        &s(&train_dir.join("checkpoint.bin")), "--count", "2", "--seed", "9",
        "--out", &s(&sample_dir),
    ]);

    // evaluate
    let eval_dir = dir("eval");
    run(&[
        "evaluate", "--generated", &mrwp_csv, "--reference", &rwp_csv, "--map", &map,
        "--n-proj", "200", "--seed", "10", "--out", &s(&eval_dir),
    ]);

    // netsim driven by the trajectory file.
    let net_dir = dir("net");
    run(&[
        "netsim", "--map", &map, "--traj-source", "file", "--trajectories", &mrwp_csv,
        "--users", "8", "--horizon", "40", "--episodes", "2", "--policy", "greedy",
        "--seed", "11", "--out", &s(&net_dir),
    ]);

    // render: trajectory heatmap over the map.
    let render_dir = dir("render");
    run(&[
        "render", "--map", &map, "--trajectories", &mrwp_csv, "--seed", "12",
        "--out", &s(&render_dir),
    ]);

    // pipeline comparing two baselines against the free-space reference.
    let pipe_dir = dir("pipe");
    run(&[
        "pipeline", "--map", &map, "--reference", &rwp_csv, "--methods", "rwp,mrwp",
        "--count", "6", "--horizon", "30", "--n-proj", "100", "--seed", "13",
        "--out", &s(&pipe_dir),
    ]);

    // Replay every manifest and compare all primary outputs.
    rerun_matches("gen-map", &map_dir, &["map.json", "map.png"]);
    rerun_matches("gen-traj", &mrwp_dir, &["trajectories.csv"]);
    rerun_matches("gen-traj", &rwp_dir, &["trajectories.csv"]);
    rerun_matches("train", &train_dir, &["checkpoint.bin", "loss.csv"]);
    rerun_matches("gen-traj", &sample_dir, &["trajectories.csv"]);
    rerun_matches("evaluate", &eval_dir, &["report.json"]);
    rerun_matches("netsim", &net_dir, &["summary.json", "kpis_ep0.csv", "kpis_ep1.csv"]);
    rerun_matches("render", &render_dir, &["heatmap.png"]);
    rerun_matches("pipeline", &pipe_dir, &["table.csv", "table.json"]);

    println!(
        "ACCEPTANCE 10 (manifest reruns): PASS ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
}
