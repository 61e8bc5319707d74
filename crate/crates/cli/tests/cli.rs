use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ladder-eit")).args(args).output().expect("binary runs")
}

fn preset(name: &str) -> String {
    presets().join(name).display().to_string()
}

#[test]
fn qfm_params_from_fig1_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["qfm-params", "--config", &preset("fig1_lower.toml"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("omega_M = 0.52\n"), "{stdout}");
    assert!(stdout.contains("freq_M = 80\n"));
    assert!(stdout.contains("delta_M = 2.725\n"));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv, "coordinate,transmission,im_rho21\n");
    assert!(dir.path().join("summary.toml").exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    let text = fs::read_to_string(presets().join("fig1_upper.toml")).unwrap().replace("omega_L = 80.0\n", "");
    fs::write(&cfg, text).unwrap();
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.omega_L"));

    let out = run(&["spectrum", "--config", &preset("fig1_upper.toml"), "--points", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["spectrum", "--config", &preset("fig1_upper.toml"), "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_with_two() {
    // no control coupling at all: the sideband has no peaks to predict
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.toml");
    let text = fs::read_to_string(presets().join("fig4a.toml")).unwrap().replace("omega_c = 5.0", "omega_c = 0.0");
    fs::write(&cfg, text).unwrap();
    let out = run(&["predict", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spectrum_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let out = run(&[
            "spectrum",
            "--config",
            &preset("fig1_upper.toml"),
            "--points",
            "21",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(a.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.path().join("spectrum.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 22);
}

#[test]
fn summary_echo_reruns_the_scenario() {
    let first = tempfile::tempdir().unwrap();
    let out = run(&["predict", "--config", &preset("fig4c.toml"), "--out", first.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(first.path().join("summary.toml")).unwrap();
    let echoed = summary.parse::<toml::Table>().unwrap()["provenance"]["config"].clone();
    let second = tempfile::tempdir().unwrap();
    let cfg = second.path().join("echo.toml");
    fs::write(&cfg, toml::to_string(&echoed).unwrap()).unwrap();
    let out = run(&["predict", "--config", cfg.to_str().unwrap(), "--out", second.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rerun = fs::read_to_string(second.path().join("summary.toml")).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("dir = ")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&summary), strip(&rerun));
}

#[test]
fn every_preset_parses() {
    let mut n = 0;
    for entry in fs::read_dir(presets()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ladder_eit::config::load_config(&path, &Default::default())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert_eq!(n, 8);
}

#[test]
fn fig1_preset_values() {
    let cfg = ladder_eit::config::load_config(&presets().join("fig1_lower.toml"), &Default::default()).unwrap();
    let p = cfg.model_params().unwrap();
    let v = |f: Option<ladder_eit::Freq>| f.unwrap().value();
    assert_eq!((p.omega_p.value(), p.omega_c.value(), p.gamma.value()), (2.0, 2.0, 5.0));
    assert_eq!((v(p.delta_1), v(p.delta_2), v(p.omega_1), v(p.omega_2)), (1080.0, 1000.0, 108.0, 10.0));
    assert_eq!(v(p.omega_l), 80.0);
}

#[test]
fn sideband_preset_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dual-floquet", "--config", &preset("fig3b_sideband.toml"), "--points", "121", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("indices (n, m, l, k, j) = (-2, 1, -3, 1, -1)"), "{stdout}");
    assert_eq!(fs::read_to_string(dir.path().join("dual_floquet.csv")).unwrap().lines().count(), 122);
}
