use std::fs;
use std::process::Command;

fn rotors() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rotors"));
    c.env("RUST_LOG", "warn");
    c
}

const SMALL: &[&str] = &[
    "--set",
    "system.n1=32",
    "--set",
    "system.n2=32",
    "--set",
    "system.eps=[0.0, 1.0]",
    "--set",
    "run.n_kicks=5",
    "--set",
    "run.n_initial_states=2",
    "--set",
    "classical.lyapunov_samples=20",
    "--set",
    "classical.lyapunov_steps=100",
    "--set",
    "classical.correlator_trajectories=500",
];

#[test]
fn sweep_writes_outputs_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = rotors()
        .args(["purity-sweep", "--seed", "3", "--out"])
        .arg(&out)
        .args(SMALL)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("timing.json").exists());
    let n_csv = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(n_csv, 2);
    assert!(rotors().arg("verify").arg(&out).status().unwrap().success());
}

#[test]
fn output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = rotors()
        .env("ROTORS_OUT", dir.path())
        .args(["lyapunov", "--seed", "4", "--set", "system.k1=[10.0]"])
        .args(["--set", "classical.lyapunov_samples=20", "--set", "classical.lyapunov_steps=100"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("lyapunov-estimate-seed4").join("lyapunov.csv").exists());
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gamma.toml");
    fs::write(
        &cfg,
        "[experiment]\nkind = \"gamma-estimate\"\nseed = 5\n\n[system]\nk1 = [10.0]\neps = 2.0\n\n[classical]\ncorrelator_trajectories = 500\n",
    )
    .unwrap();
    let out = dir.path().join("g");
    let status = rotors().args(["gamma", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("gamma.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    // missing seed
    let s = rotors().args(["gamma", "--out"]).arg(dir.path().join("a")).status().unwrap();
    assert_eq!(s.code(), Some(2));
    // unknown key
    let s = rotors()
        .args(["gamma", "--seed", "1", "--set", "system.bogus=1", "--out"])
        .arg(dir.path().join("b"))
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(2));
    // kind mismatch between subcommand and file
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[experiment]\nkind = \"purity-sweep\"\nseed = 1\n").unwrap();
    let s = rotors().args(["gamma", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(s.code(), Some(2));
}

#[test]
fn regime_refusal_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotors()
        .args(["collapse", "--seed", "1", "--set", "system.k1=[10.0]", "--set", "system.eps=0.3"])
        .args(["--set", "classical.lyapunov_samples=20", "--set", "classical.lyapunov_steps=100"])
        .arg("--out")
        .arg(dir.path().join("r"))
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(3));
}

#[test]
fn memory_refusal_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let s = rotors()
        .args(["wigner-compare", "--seed", "1", "--set", "phase_space.sizes=[4096]"])
        .args(["--set", "phase_space.memory_budget_mb=256"])
        .arg("--out")
        .arg(dir.path().join("w"))
        .status()
        .unwrap();
    assert_eq!(s.code(), Some(4));
}
