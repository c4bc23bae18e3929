use std::path::Path;
use std::process::{Command, Output};

use jamswarm_core::experiments::{ExperimentSpec, Manifest, Profile, Variant};
use jamswarm_core::ScenarioConfig;

fn jamswarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamswarm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn toy_config(dir: &Path) -> String {
    let path = dir.join("toy.toml");
    std::fs::write(&path, ScenarioConfig::toy().to_toml_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_subcommands() {
    let out = jamswarm(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["run", "sweep", "reproduce"] {
        assert!(text.contains(cmd), "{text}");
    }
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = jamswarm(&[
        "run",
        "--variant",
        "tfbe",
        "--trials",
        "2",
        "--frames",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["frames.csv", "summary.csv", "schedules.csv", "convergence.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest = Manifest::load(out.join("manifest.json")).unwrap();
    assert_eq!(manifest.trials, 2);
    assert_eq!(manifest.invariant_violations, 0);
}

#[test]
fn sweep_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = jamswarm(&[
            "sweep",
            "--config",
            &config,
            "--variants",
            "PROPOSED,TABE",
            "--cost-factors",
            "0,0.3",
            "--budgets",
            "100000",
            "--trials",
            "2",
            "--frames",
            "2",
            "--seed",
            "5",
            "--jobs",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("frames.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    // 2 variants x 2 cost factors x 2 trials x 2 frames
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 1 + 16);
}

#[test]
fn spec_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new("from_file", ScenarioConfig::toy(), Profile::Desk);
    spec.variants = vec![Variant::Tfba];
    spec.frames = 1;
    spec.trials = 1;
    let path = dir.path().join("spec.toml");
    std::fs::write(&path, spec.to_toml_string()).unwrap();
    let out = dir.path().join("out");
    let status = jamswarm(&["run", "--spec", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest = Manifest::load(out.join("manifest.json")).unwrap();
    assert_eq!(manifest.name, "from_file");
}

#[test]
fn bad_arguments_fail() {
    assert!(!jamswarm(&["run", "--variant", "GREEDY"]).status.success());
    assert!(!jamswarm(&["reproduce", "fig7"]).status.success());
    assert!(!jamswarm(&["sweep", "--settings", "4"]).status.success());
    assert!(!jamswarm(&["run", "--config", "/nonexistent.toml"]).status.success());
}
