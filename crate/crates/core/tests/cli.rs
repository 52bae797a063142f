//! End-to-end checks of the command-line front end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_genpert"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn run_morse_writes_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("morse_circle.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["pass_rate"].as_f64().unwrap() >= 0.99);
    assert_eq!(report["control_failed"], true);
    let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("trial,seed,scenario,pass,margin,witness"));
    assert_eq!(csv.lines().count(), 101);
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn injectivity_at_l_equal_2n_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("injectivity_circle.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "dims.l=2",
        "--set",
        r#"base_map={"name":"distance_squared","p":[[0.5,-0.3],[-0.2,0.7]]}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("requires ℓ > 2n") && err.contains("dims.l"), "{err}");
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_field_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("morse_circle.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "tolerances.morse_dett=1e-3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("morse_dett"));
}

#[test]
fn degenerate_perturbations_exit_one() {
    // a vanishing scale leaves the constant function on the circle
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "run",
        "--config",
        config("morse_circle.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "perturbation_scale=1e-300",
        "--trials",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_and_trials_flags_and_replay() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["5", "5", "6"]) {
        let out = run(&[
            "run",
            "--config",
            config("injectivity_circle.json").to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--seed",
            seed,
            "--trials",
            "10",
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.json")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
    let report: serde_json::Value = serde_json::from_slice(&read(&dirs[0])).unwrap();
    assert_eq!(report["trial_count"], 10);
    assert_eq!(report["config"]["seed"], 5);

    // the echoed config is itself a valid config reproducing the run
    let echo = dirs[0].path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&report["config"]).unwrap()).unwrap();
    let again = tempfile::tempdir().unwrap();
    let out = run(&["run", "--config", echo.to_str().unwrap(), "--out", again.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(&dirs[0]), std::fs::read(again.path().join("report.json")).unwrap());
}

#[test]
fn analyze_jet_whitney_umbrella_origin() {
    let out = run(&["analyze-jet", "--map", "whitney_umbrella", "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["corank"], 1);
    assert_eq!(v["verdict"]["transverse"], true);
    assert_eq!(v["verdict"]["on_stratum"], true);
    assert_eq!(v["sigma_codim"], 2);

    let out = run(&["analyze-jet", "--map", "fold", "--point", "0.5,-1"]);
    let v = stdout_json(&out);
    assert_eq!(v["corank"], 0);
    assert_eq!(v["verdict"]["on_stratum"], false);
}

#[test]
fn sf_and_fibers_subcommands() {
    let out = run(&["sf", "--manifold", "sphere2", "--m", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["s_f"], 3);

    let out = run(&["fibers", "--p", "0,0;3,0", "--y", "4,4", "--y", "1,1", "--radius", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    // |x|^2 = 4 and |x - (3,0)|^2 = 4 meet at (1.5, ±sqrt 1.75); radii 1 and 1 do not meet
    assert_eq!(v[0]["count"], 2);
    assert_eq!(v[1]["count"], 0);
}

#[test]
fn report_pools_and_rejects_mixed_scenarios() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (d, seed) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "run",
            "--config",
            config("immersion_circle.json").to_str().unwrap(),
            "--out",
            d.path().to_str().unwrap(),
            "--seed",
            seed,
            "--trials",
            "20",
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let out = run(&["run", "--config", config("m2_sphere.json").to_str().unwrap(), "--out", c.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let out = run(&["report", a.path().to_str().unwrap(), b.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["trial_count"], 40);
    assert_eq!(v["report_count"], 2);

    let out = run(&["report", a.path().to_str().unwrap(), c.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different scenarios"));
}
