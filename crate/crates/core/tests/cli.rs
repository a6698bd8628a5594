// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dynloc::app::exit;

fn dynloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynloc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_from_flags_writes_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = dynloc(&[
        "simulate", "--lattice", "pseudo-glauber-fock", "--sigma", "1", "--waveform", "sinusoidal", "--omega", "1",
        "--gamma", "3.353", "--cycles", "2", "--out", out_dir,
    ]);
    assert_eq!(code(&out), exit::SUCCESS, "{}", stderr(&out));
    for name in ["trajectory.csv", "revivals.csv", "simulate.json", "heatmap.dat", "revival.dat"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.contains("config_sha256"), "{name} lacks provenance");
    }
    let revivals = data_lines(&dir.path().join("revivals.csv"));
    assert_eq!(revivals[0], "cycle,t,fidelity,initial_site_probability");
    assert_eq!(revivals.len(), 3);
    assert!(stdout(&out).contains("revival fidelity at t = 2T"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "command = \"find-dl\"\nformats = [\"csv\"]\n[sweep]\nomega_over_sigma = [1.0]\ngamma_range = { min = 0.0, max = 6.0, step = 0.05 }\n",
    )
    .unwrap();
    let out = dynloc(&[
        "find-dl", "--config", cfg.to_str().unwrap(), "--omega-over-sigma", "5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), exit::SUCCESS, "{}", stderr(&out));
    let rows = data_lines(&dir.path().join("dl_points.csv"));
    assert!(rows[1].starts_with("5.0,2.45"), "{rows:?}");
    assert!(!dir.path().join("dl_points.json").exists());
}

#[test]
fn config_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "command = \"simulate\"\n[lattice]\nlaw = \"homogeneous\"\nsigma = 1.0\nspacing = 2.0\n").unwrap();
    let out = dynloc(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), exit::CONFIG);
    assert!(stderr(&out).contains("lattice.spacing"), "{}", stderr(&out));

    let out = dynloc(&["simulate", "--sigma", "1"]);
    assert_eq!(code(&out), exit::CONFIG);
    assert!(stderr(&out).contains("lattice.law"));

    let out = dynloc(&[
        "simulate", "--lattice", "homogeneous", "--sigma", "1", "--waveform", "sinusoidal", "--omega", "2",
        "--gamma", "1", "--f0", "3",
    ]);
    assert_eq!(code(&out), exit::CONFIG);
    assert!(stderr(&out).contains("drive.f0"));

    let out = dynloc(&["quasienergy", "--omega-over-sigma", "1", "--gamma-range", "0:1"]);
    assert_eq!(code(&out), exit::CONFIG);
}

#[test]
fn empty_format_set_succeeds_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    let out = dynloc(&[
        "anomaly", "--omega-over-sigma", "5", "--gamma-range", "0:3:0.02", "--format", "none", "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), exit::SUCCESS, "{}", stderr(&out));
    assert!(stdout(&out).contains("no output files"));
    assert!(!target.exists());
}

#[test]
fn truncation_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "command = \"simulate\"\nformats = []\ncycles = 10\n[lattice]\nlaw = \"homogeneous\"\nsigma = 1.0\ntruncation = 8\n[drive]\nwaveform = \"sinusoidal\"\nomega = 1.0\ngamma = 0.5\n",
    )
    .unwrap();
    let out = dynloc(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), exit::TRUNCATION);
    assert!(stderr(&out).contains("truncation"));
}

#[test]
fn write_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = dynloc(&[
        "bloch", "--sigma", "1", "--f0", "4", "--cycles", "1", "--format", "csv", "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), exit::WRITE);
    assert!(stderr(&out).contains(blocker.to_str().unwrap()));
}

#[test]
fn wkb_compare_plot_data_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynloc(&[
        "wkb-compare", "--omega-over-sigma", "0.2", "--gamma-range", "0:3:0.1", "--format", "plot-data,json", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), exit::SUCCESS, "{}", stderr(&out));
    let rows = data_lines(&dir.path().join("wkb_compare.dat"));
    assert!(rows.len() > 10);
    assert!(rows.iter().all(|r| r.split(' ').count() == 3));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("wkb_compare.json")).unwrap()).unwrap();
    assert!(doc["result"][0]["max_relative_deviation"].as_f64().unwrap() <= 0.05);
}
