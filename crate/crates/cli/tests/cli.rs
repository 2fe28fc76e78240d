use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coprl"))
}

fn maps_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_oracle(dir: &Path, map: &str) -> PathBuf {
    let snap = dir.join(format!("{map}.bin"));
    let map_path = maps_dir().join(format!("{map}.json"));
    ok(&[
        "train-backend",
        "--map",
        s(&map_path),
        "--backend",
        "oracle",
        "--out",
        s(&snap),
    ]);
    snap
}

#[test]
fn plan_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let snap = train_oracle(dir.path(), "four_rooms_static");
    let map = maps_dir().join("four_rooms_static.json");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("plan{i}.json"));
        ok(&[
            "plan",
            "--map",
            s(&map),
            "--backend",
            s(&snap),
            "--k",
            "4",
            "--alpha",
            "0.5",
            "--iters",
            "400",
            "--seed",
            "7",
            "--start",
            "10,10",
            "--goal",
            "60,60",
            "--out",
            s(&out),
        ]);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let v: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(v["K"], 4.0);
    assert_eq!(v["alpha"], 0.5);
    assert!(v["wall_time_ms"].is_null());
    let wps = v["waypoints"].as_array().unwrap();
    assert!(wps.len() >= 2);
    assert!(v["cvar"].as_f64().unwrap() <= 4.0 + 1e-9);
}

#[test]
fn unconstrained_plan_records_null_k_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let snap = train_oracle(dir.path(), "four_rooms");
    let map = maps_dir().join("four_rooms.json");
    let out = dir.path().join("plan.json");
    ok(&[
        "plan",
        "--map",
        s(&map),
        "--backend",
        s(&snap),
        "--iters",
        "200",
        "--difficulty",
        "0.3",
        "--tree",
        "--timing",
        "--out",
        s(&out),
    ]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["K"].is_null());
    assert!(v["wall_time_ms"].as_f64().unwrap() > 0.0);
    assert!(!v["tree"].as_array().unwrap().is_empty());
}

#[test]
fn eval_and_plot_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    let cfg = serde_json::json!({
        "map": maps_dir().join("four_rooms_static.json"),
        "algorithms": ["cop", "sorb", "grl"],
        "backend": "oracle",
        "k": [4, 10],
        "start_goal": {"mode": "regions", "start": [2, 2, 37, 37], "goal": [43, 43, 78, 78]},
        "horizon": 150,
        "trials": 3,
        "iterations": 300,
        "sorb_nodes": 100
    });
    std::fs::write(&config, cfg.to_string()).unwrap();
    let mut csvs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("run{i}"));
        ok(&["eval", "--config", s(&config), "--out", s(&out)]);
        csvs.push((
            std::fs::read(out.join("trials.csv")).unwrap(),
            std::fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(csvs[0], csvs[1]);
    let trials = String::from_utf8(csvs[0].0.clone()).unwrap();
    // header plus 3 algorithms x 2 limits x 3 trials
    assert_eq!(trials.lines().count(), 1 + 18);

    let trials_path = dir.path().join("run0/trials.csv");
    for kind in [
        "success_vs_difficulty",
        "reward_vs_difficulty",
        "cost_box",
        "reward_success_bars",
    ] {
        let svg = dir.path().join(format!("{kind}.svg"));
        ok(&["plot", "--in", s(&trials_path), "--kind", kind, "--out", s(&svg)]);
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = run(&["eval", "--config", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let snap = train_oracle(dir.path(), "four_rooms");
    let other = maps_dir().join("four_rooms_static.json");
    let out = run(&[
        "plan",
        "--map",
        s(&other),
        "--backend",
        s(&snap),
        "--out",
        s(&dir.path().join("p.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"map\": \"x\", \"nonsense\": 1}").unwrap();
    assert_eq!(
        run(&["eval", "--config", s(&bad), "--out", s(dir.path())])
            .status
            .code(),
        Some(1)
    );

    let out = run(&["plot", "--in", s(&missing), "--kind", "pie", "--out", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["plan", "--start", "1,2"]).status.code(), Some(2));
}
