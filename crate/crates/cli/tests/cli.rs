use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use kdvb::io::decode_snapshots;

fn kdvb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdvb"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

const SMALL_RUN: &[&str] = &["--grid-n", "64", "--half-width", "2", "--t-final", "0.1", "--dt", "0.01"];

#[test]
fn zero_data_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("zero.toml"), "[data]\nkind = \"zero\"\n").unwrap();
    let mut args = vec!["--config", "zero.toml", "solve"];
    args.extend_from_slice(SMALL_RUN);
    let o = kdvb(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap());
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[1..].iter().all(|&v| v == 0.0)));
}

#[test]
fn smooth_data_dissipates_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--alpha", "1"];
    args.extend_from_slice(SMALL_RUN);
    let o = kdvb(dir.path(), &args);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("energy nonincreasing: yes"));
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap());
    assert!(rows.windows(2).all(|w| w[1][3] < w[0][3]));
}

#[test]
fn snapshots_match_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--seed", "4"];
    args.extend_from_slice(SMALL_RUN);
    assert_eq!(code(&kdvb(dir.path(), &args)), 0);
    let file = decode_snapshots(&fs::read(dir.path().join("out/snapshots.bin")).unwrap()).unwrap();
    assert!(file.meta.contains("seed 4"));
    assert!(file.meta.contains("config-sha256 "));
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap());
    assert_eq!(file.records.len(), rows.len());
    for (rec, row) in file.records.iter().zip(&rows) {
        assert_eq!(rec.t, row[0]);
        assert_eq!(rec.field.grid().n(), 64);
        assert_eq!(kdvb::norms::sobolev_norm(&rec.field, 0.0), row[1]);
    }
}

#[test]
fn blow_up_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("blow.toml"),
        "[equation]\nalpha = 0.0\n[grid]\nn = 64\nhalf_width = 1.0\n\
         [data]\nkind = \"gaussian\"\namplitude = 1e8\nwidth = 0.5\n\
         [solver]\ndt = 0.1\nt_final = 5.0\n",
    )
    .unwrap();
    assert_eq!(code(&kdvb(dir.path(), &["--config", "blow.toml", "solve"])), 3);
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "seed = [\n").unwrap();
    assert_eq!(code(&kdvb(dir.path(), &["--config", "bad.toml", "solve"])), 1);
    fs::write(dir.path().join("unknown.toml"), "sede = 1\n").unwrap();
    assert_eq!(code(&kdvb(dir.path(), &["--config", "unknown.toml", "solve"])), 1);
    assert_eq!(code(&kdvb(dir.path(), &["--config", "missing.toml", "solve"])), 1);
    assert_eq!(code(&kdvb(dir.path(), &["solve", "--grid-n", "100"])), 1);
    assert_eq!(code(&kdvb(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&kdvb(dir.path(), &["--version"])), 0);
}

#[test]
fn inflation_beyond_nyquist_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvb(dir.path(), &["inflate", "--grid-n", "1024", "--half-width", "8"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Nyquist"));
}

#[test]
fn inflation_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvb(dir.path(), &["inflate", "--format", "json", "--out", "rough"]);
    let text = fs::read_to_string(dir.path().join("rough/inflation.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let slope = v["report"]["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
    assert_eq!(v["report"]["bounded_ratio"], false);
    // the exit status follows the lower-bound check
    let violations = v["report"]["violations"].as_array().unwrap();
    assert_eq!(code(&o), if violations.is_empty() { 0 } else { 2 });

    let o = kdvb(dir.path(), &["inflate", "--s", "-0.5", "--format", "json", "--out", "contrast"]);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("contrast/inflation.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["bounded_ratio"], true);
    assert!([0, 2].contains(&code(&o)));
    let plot = fs::read_to_string(dir.path().join("contrast/inflation.dat")).unwrap();
    let cols: Vec<usize> = plot
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().count())
        .collect();
    assert_eq!(cols, vec![2; 6]);
}

#[test]
fn empty_multiplier_sweep_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvb(dir.path(), &["multiplier", "--n-max-exp", "-5", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/blocks.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn small_multiplier_sweep_and_c_max() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["multiplier", "--n-max-exp", "0", "--l-max-exp", "3", "--resolution", "8"];
    let o = kdvb(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("fitted C"));
    let mut tight = args.to_vec();
    tight.extend(["--c-max", "0.01"]);
    assert_eq!(code(&kdvb(dir.path(), &tight)), 2);
}

#[test]
fn weighted_mode_checks_rho() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kdvb(dir.path(), &["multiplier", "--mode", "weighted", "--rho", "0.4"])), 1);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "picard",
        "--grid-n",
        "64",
        "--half-width",
        "2",
        "--t-final",
        "0.1",
        "--dt",
        "0.01",
        "--seed",
        "17",
        "--format",
        "json",
    ];
    fs::write(dir.path().join("rand.toml"), "[data]\nkind = \"random\"\nnorm = 0.1\ndecay = 2.0\n").unwrap();
    let mut with_cfg = vec!["--config", "rand.toml"];
    with_cfg.extend_from_slice(&args);
    assert_eq!(code(&kdvb(dir.path(), &with_cfg)), 0);
    let first = fs::read(dir.path().join("out/picard.json")).unwrap();
    assert_eq!(code(&kdvb(dir.path(), &with_cfg)), 0);
    assert_eq!(first, fs::read(dir.path().join("out/picard.json")).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["header"]["seed"], 17);
    assert!(v["header"]["config"].as_str().unwrap().contains("\"random\""));

    // another seed, other data
    let k = with_cfg.len() - 3;
    with_cfg[k] = "18";
    assert_eq!(code(&kdvb(dir.path(), &with_cfg)), 0);
    assert_ne!(first, fs::read(dir.path().join("out/picard.json")).unwrap());
}

#[test]
fn norms_of_linear_flows() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdvb(dir.path(), &["norms", "--grid-n", "128", "--half-width", "4"]);
    assert_eq!(code(&o), 0);
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/norms.csv")).unwrap());
    for r in rows {
        // the free group is unitary, the dissipative one contracts
        assert!((r[3] - r[1]).abs() <= 1e-12 * r[1]);
        assert!(r[2] < r[1]);
    }
}

#[test]
fn fuzz_seed_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_parser");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        kdvb_cli::config::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 4);
}
