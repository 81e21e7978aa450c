//! End-to-end tests of the `trajsynth` binary: exit codes, determinism,
//! config/flag precedence, and pixel-level output checks.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trajsynth"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn trajsynth");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_expecting(args: &[&str], code: i32) -> String {
    let out = bin().args(args).output().expect("spawn trajsynth");
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {args:?} exited {:?}, expected {code}:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn gen_map(dir: &Path, seed: &str, side: &str) {
    run_ok(&[
        "gen-map",
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
        "--side",
        side,
    ]);
}

#[test]
fn gen_map_is_deterministic_and_renders() {
    let tmp = tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_map(&a, "5", "480");
    gen_map(&b, "5", "480");
    assert_eq!(read(&a.join("map.json")), read(&b.join("map.json")));
    assert_eq!(read(&a.join("map.png")), read(&b.join("map.png")));

    let img = image::open(a.join("map.png")).unwrap().into_rgb8();
    assert_eq!(img.dimensions(), (48, 48));
    assert!(
        img.pixels().any(|p| p.0 != [0, 0, 0]),
        "map render contains no street pixels"
    );

    let c = tmp.path().join("c");
    gen_map(&c, "6", "480");
    assert_ne!(
        read(&a.join("map.json")),
        read(&c.join("map.json")),
        "different seeds produced the same map"
    );
}

#[test]
fn missing_out_dir_is_a_usage_error() {
    let err = run_expecting(&["gen-map", "--seed", "1"], 2);
    assert!(err.contains("--out"), "stderr should mention --out: {err}");
}

#[test]
fn zero_threads_is_a_usage_error() {
    let tmp = tempdir().unwrap();
    run_expecting(
        &[
            "gen-map",
            "--threads",
            "0",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        2,
    );
}

#[test]
fn gen_traj_requires_a_map() {
    let tmp = tempdir().unwrap();
    run_expecting(&["gen-traj", "--out", tmp.path().to_str().unwrap()], 2);
}

#[test]
fn missing_map_file_is_an_io_error() {
    let tmp = tempdir().unwrap();
    run_expecting(
        &[
            "gen-traj",
            "--map",
            "/nonexistent/map.json",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        4,
    );
}

#[test]
fn malformed_config_is_a_parse_error() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "not json at all").unwrap();
    run_expecting(
        &[
            "gen-map",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("out").to_str().unwrap(),
        ],
        3,
    );
}

#[test]
fn manifest_for_another_command_is_rejected() {
    let tmp = tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "render", "seed": 0, "params": {}}"#).unwrap();
    let err = run_expecting(
        &[
            "gen-map",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("out").to_str().unwrap(),
        ],
        2,
    );
    assert!(
        err.contains("render") && err.contains("gen-map"),
        "stderr should name both commands: {err}"
    );
}

#[test]
fn flags_override_config_values() {
    let tmp = tempdir().unwrap();
    let a = tmp.path().join("a");
    gen_map(&a, "3", "480");
    let manifest = a.join("run.json");

    // Rerun with no extra flags: byte-identical.
    let b = tmp.path().join("b");
    run_ok(&[
        "gen-map",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(read(&a.join("map.json")), read(&b.join("map.json")));

    // Rerun with a --side override: the flag wins and is recorded.
    let c = tmp.path().join("c");
    run_ok(&[
        "gen-map",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--side",
        "320",
    ]);
    let img = image::open(c.join("map.png")).unwrap().into_rgb8();
    assert_eq!(img.dimensions(), (32, 32));
    let recorded: serde_json::Value =
        serde_json::from_slice(&read(&c.join("run.json"))).unwrap();
    assert_eq!(recorded["params"]["side"], 320.0);
    assert_eq!(recorded["seed"], 3);
}

#[test]
fn render_heatmap_places_pixels_where_the_matrix_says() {
    let tmp = tempdir().unwrap();
    let n = 8;

    // Single hot cell at CSV row 2, column 5 (rows top-down) must light the
    // pixel at (x=5, y=2) and nothing else.
    let mut rows = vec![vec!["0.0"; n]; n];
    rows[2][5] = "1.0";
    let csv: String = rows
        .iter()
        .map(|r| r.join(","))
        .collect::<Vec<_>>()
        .join("\n");
    let hot = tmp.path().join("hot.csv");
    std::fs::write(&hot, csv).unwrap();
    let out = tmp.path().join("hot");
    run_ok(&[
        "render",
        "--heatmap",
        hot.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let img = image::open(out.join("heatmap.png")).unwrap().into_luma8();
    assert_eq!(img.dimensions(), (8, 8));
    for (x, y, p) in img.enumerate_pixels() {
        let expected = if (x, y) == (5, 2) { 255 } else { 0 };
        assert_eq!(p.0[0], expected, "pixel ({x}, {y})");
    }

    // All-zero matrix renders all black.
    let zero = tmp.path().join("zero.csv");
    std::fs::write(&zero, vec!["0,0,0,0,0,0,0,0"; 8].join("\n")).unwrap();
    let out0 = tmp.path().join("zero");
    run_ok(&[
        "render",
        "--heatmap",
        zero.to_str().unwrap(),
        "--out",
        out0.to_str().unwrap(),
    ]);
    let img0 = image::open(out0.join("heatmap.png")).unwrap().into_luma8();
    assert!(img0.pixels().all(|p| p.0[0] == 0));
}

#[test]
fn render_rejects_bad_input_combinations() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    run_expecting(&["render", "--out", out.to_str().unwrap()], 2);
    run_expecting(
        &[
            "render",
            "--trajectories",
            "somewhere.csv",
            "--out",
            out.to_str().unwrap(),
        ],
        2,
    );
}

#[test]
fn evaluating_a_set_against_itself_is_perfect() {
    let tmp = tempdir().unwrap();
    let map_dir = tmp.path().join("map");
    gen_map(&map_dir, "1", "480");
    let map = map_dir.join("map.json");

    let traj_dir = tmp.path().join("traj");
    run_ok(&[
        "gen-traj",
        "--map",
        map.to_str().unwrap(),
        "--model",
        "rwp",
        "--count",
        "5",
        "--horizon",
        "12",
        "--out",
        traj_dir.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    let csv = traj_dir.join("trajectories.csv");

    let eval_dir = tmp.path().join("eval");
    run_ok(&[
        "evaluate",
        "--generated",
        csv.to_str().unwrap(),
        "--reference",
        csv.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_slice(&read(&eval_dir.join("report.json"))).unwrap();
    assert_eq!(report["edr_mean"], 0.0);
    assert_eq!(report["sliced_wasserstein"], 0.0);
    assert!((report["cosine"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn netsim_is_deterministic_across_runs() {
    let tmp = tempdir().unwrap();
    let map_dir = tmp.path().join("map");
    gen_map(&map_dir, "4", "480");
    let map = map_dir.to_str().unwrap().to_string() + "/map.json";

    let mut outs = Vec::new();
    for name in ["n1", "n2"] {
        let dir = tmp.path().join(name);
        run_ok(&[
            "netsim",
            "--map",
            &map,
            "--traj-source",
            "mrwp",
            "--users",
            "4",
            "--horizon",
            "10",
            "--episodes",
            "2",
            "--policy",
            "greedy",
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        outs.push(dir);
    }
    for file in ["summary.json", "kpis_ep0.csv", "kpis_ep1.csv"] {
        assert_eq!(
            read(&outs[0].join(file)),
            read(&outs[1].join(file)),
            "{file} differs between identical runs"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&read(&outs[0].join("summary.json"))).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn train_then_sample_produces_trajectories() {
    let tmp = tempdir().unwrap();
    let map_dir = tmp.path().join("map");
    gen_map(&map_dir, "7", "320");
    let map = map_dir.join("map.json");

    let traj_dir = tmp.path().join("traj");
    run_ok(&[
        "gen-traj",
        "--map",
        map.to_str().unwrap(),
        "--model",
        "mrwp",
        "--count",
        "12",
        "--horizon",
        "30",
        "--out",
        traj_dir.to_str().unwrap(),
        "--seed",
        "8",
    ]);

    let train_dir = tmp.path().join("train");
    run_ok(&[
        "train",
        "--map",
        map.to_str().unwrap(),
        "--trajectories",
        traj_dir.join("trajectories.csv").to_str().unwrap(),
        "--steps",
        "3",
        "--batch-size",
        "4",
        "--out",
        train_dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let loss = String::from_utf8(read(&train_dir.join("loss.csv"))).unwrap();
    assert_eq!(loss.lines().count(), 4, "header plus one row per step");
    assert!(loss.starts_with("step,loss"));

    let sample_dir = tmp.path().join("samples");
    run_ok(&[
        "gen-traj",
        "--map",
        map.to_str().unwrap(),
        "--model",
        "diffusion",
        "--checkpoint",
        train_dir.join("checkpoint.bin").to_str().unwrap(),
        "--count",
        "2",
        "--out",
        sample_dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    let csv = String::from_utf8(read(&sample_dir.join("trajectories.csv"))).unwrap();
    assert!(csv.starts_with("traj_id,seq,x,y"));
    assert!(
        csv.lines().skip(1).any(|l| l.starts_with("1,")),
        "expected two sampled trajectories"
    );
}

#[test]
fn diffusion_without_checkpoint_is_a_usage_error() {
    let tmp = tempdir().unwrap();
    run_expecting(
        &[
            "gen-traj",
            "--map",
            "whatever.json",
            "--model",
            "diffusion",
            "--out",
            tmp.path().to_str().unwrap(),
        ],
        2,
    );
}
