//! End-to-end checks of the command-line interface: stage isolation through
//! the documented file formats, exit codes, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn tubeseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tubeseg"))
        .args(args)
        .output()
        .expect("failed to spawn tubeseg")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_and_stagewise_pipeline_produce_a_ranked_pool() {
    let dir = tempfile::tempdir().unwrap();
    let scene_dir = dir.path().join("scene");
    // a small scene keeps the stage chain quick
    let spec = serde_json::json!({
        "width": 64, "height": 64, "frame_count": 6, "seed": 0,
        "noise_amp": 0.1, "background_intensity": 0.3,
        "background_velocity": [0.0, 0.0],
        "objects": [{
            "shape": "rect", "size": [16.0, 12.0], "center": [20.0, 32.0],
            "velocity": [2.0, 0.0], "intensity": 0.75
        }]
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    assert_ok(&tubeseg(&[
        "synth",
        "--spec",
        path_str(&spec_path),
        "--seed",
        "5",
        "--out",
        path_str(&scene_dir),
    ]));
    let manifest = scene_dir.join("scene.json");
    assert!(manifest.exists());

    // boundaries on the first flow
    let bmap = dir.path().join("b.pgm");
    assert_ok(&tubeseg(&[
        "boundaries",
        "--flow",
        path_str(&scene_dir.join("flows/flow_0000.flo")),
        "--out",
        path_str(&bmap),
    ]));

    // proposals from the quantized map
    let props = dir.path().join("props");
    assert_ok(&tubeseg(&[
        "mops",
        "--boundary",
        path_str(&bmap),
        "--out",
        path_str(&props),
        "--frame-index",
        "0",
        "--num-seeds",
        "16",
        "--seed",
        "3",
    ]));
    assert!(props.join("index.json").exists());

    // track -> cluster -> tubes -> rank -> eval -> overlay
    let traj = dir.path().join("traj.jsonl");
    assert_ok(&tubeseg(&[
        "track",
        "--scene",
        path_str(&manifest),
        "--out",
        path_str(&traj),
    ]));

    let clusters = dir.path().join("clusters.json");
    assert_ok(&tubeseg(&[
        "cluster",
        "--scene",
        path_str(&manifest),
        "--trajectories",
        path_str(&traj),
        "--proposals",
        path_str(&props),
        "--out",
        path_str(&clusters),
        "--set",
        "k_list=2,3",
    ]));

    let tubes = dir.path().join("tubes");
    assert_ok(&tubeseg(&[
        "tubes",
        "--scene",
        path_str(&manifest),
        "--trajectories",
        path_str(&traj),
        "--clusters",
        path_str(&clusters),
        "--out",
        path_str(&tubes),
    ]));
    assert!(tubes.join("tube_000").join("tube.json").exists());

    let ranked = dir.path().join("ranked.json");
    assert_ok(&tubeseg(&[
        "rank",
        "--scene",
        path_str(&manifest),
        "--tubes",
        path_str(&tubes),
        "--out",
        path_str(&ranked),
    ]));

    let eval = dir.path().join("eval.json");
    let out = tubeseg(&[
        "eval",
        "--scene",
        path_str(&manifest),
        "--ranked",
        path_str(&ranked),
        "--out",
        path_str(&eval),
        "--at-sizes",
        "1,2,4",
    ]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("abo"));

    let overlays = dir.path().join("overlays");
    assert_ok(&tubeseg(&[
        "overlay",
        "--scene",
        path_str(&manifest),
        "--tube",
        path_str(&tubes.join("tube_000")),
        "--out",
        path_str(&overlays),
    ]));
    assert!(overlays.join("overlay_0000.ppm").exists());
}

#[test]
fn run_is_deterministic_and_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scene_dir = dir.path().join("scene");
    let spec = serde_json::json!({
        "width": 64, "height": 64, "frame_count": 6, "seed": 0,
        "noise_amp": 0.1, "background_intensity": 0.3,
        "background_velocity": [0.0, 0.0],
        "objects": [{
            "shape": "rect", "size": [16.0, 12.0], "center": [20.0, 32.0],
            "velocity": [2.0, 0.0], "intensity": 0.75
        }]
    });
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    assert_ok(&tubeseg(&[
        "synth",
        "--spec",
        path_str(&spec_path),
        "--seed",
        "5",
        "--out",
        path_str(&scene_dir),
    ]));
    let manifest = scene_dir.join("scene.json");

    let run = |out: &Path, config: Option<&Path>| {
        let mut args = vec![
            "run".to_string(),
            "--scene".into(),
            path_str(&manifest).into(),
            "--out".into(),
            path_str(out).into(),
            "--seed".into(),
            "9".into(),
            "--threads".into(),
            "1".into(),
        ];
        match config {
            Some(cfg) => {
                args.push("--config".into());
                args.push(path_str(cfg).into());
            }
            None => {
                args.push("--set".into());
                args.push("k_list=2,3".into());
                args.push("--set".into());
                args.push("num_seeds=16".into());
            }
        }
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_ok(&tubeseg(&argv));
    };

    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    run(&out_a, None);
    run(&out_b, None);
    for name in ["ranked.json", "run.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // re-running from the run manifest reproduces the outputs byte for byte
    let out_c = dir.path().join("run_c");
    run(&out_c, Some(&out_a.join("run.json")));
    assert_eq!(
        std::fs::read(out_a.join("ranked.json")).unwrap(),
        std::fs::read(out_c.join("ranked.json")).unwrap()
    );
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    // unknown config key -> 2
    let dir = tempfile::tempdir().unwrap();
    let out = tubeseg(&[
        "run",
        "--scene",
        "nonexistent.json",
        "--out",
        path_str(&dir.path().join("x")),
        "--set",
        "bogus_key=1",
    ]);
    assert_eq!(out.status.code(), Some(2), "config errors exit 2");

    // missing scene file -> 3
    let out = tubeseg(&[
        "run",
        "--scene",
        "nonexistent.json",
        "--out",
        path_str(&dir.path().join("y")),
    ]);
    assert_eq!(out.status.code(), Some(3), "data errors exit 3");

    // malformed flow file -> 3
    let bad = dir.path().join("bad.flo");
    std::fs::write(&bad, b"nonsense").unwrap();
    let out = tubeseg(&[
        "boundaries",
        "--flow",
        path_str(&bad),
        "--out",
        path_str(&dir.path().join("b.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(3), "bad magic exits 3");
}
