use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sampdev_core::report::{RunManifest, SeedSource, VERIFY_COLUMNS};

fn sampdev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sampdev")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    let line = text.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[prefix.len()..].parse().unwrap()
}

const BM_VERIFY: [&str; 12] = [
    "verify", "--process", "bm", "--epsilon", "0.1,0.05", "--x", "0,1", "--n-paths", "2000", "--seed", "11", "--out",
];

#[test]
fn calibrate_brownian_prints_q() {
    let o = sampdev(&["calibrate", "--process", "bm", "--epsilon", "0.1", "--var", "1", "--sided", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("q = 9.10823e-4"), "{text}");
    assert!((value(&text, "q") / 9.1082e-4 - 1.0).abs() < 1e-4);
    assert!(text.contains("admissible for epsilon < "));
}

#[test]
fn calibrate_lfsm_prints_w_to_six_digits() {
    let o = sampdev(&["calibrate", "--process", "lfsm", "--alpha", "1.5", "--hurst", "0.8", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let w = 0.08 / (3.0 * 10f64.ln());
    assert!(text.contains(&format!("w = {w:.5e}")), "{text}");
    assert!(text.contains("w = 1.15812e-2"), "{text}");
}

#[test]
fn calibrate_rejects_alpha_outside_domain() {
    let o = sampdev(&["calibrate", "--process", "stable", "--alpha", "2.5", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(1, 2)"), "{}", stderr(&o));
}

#[test]
fn calibrate_reports_admissible_epsilon() {
    let o = sampdev(&["calibrate", "--process", "bm", "--epsilon", "0.95"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("admissible for epsilon < 8.29"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(sampdev(&["calibrate", "--bogus"]).status.code(), Some(1));
    assert_eq!(sampdev(&["calibrate", "--epsilon", "0.1"]).status.code(), Some(1));
    assert_eq!(sampdev(&["calibrate", "--process", "bm", "--epsilon", "0.1", "--sided", "3"]).status.code(), Some(1));
    assert_eq!(sampdev(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sampdev(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = BM_VERIFY.to_vec();
    args.push(out.to_str().unwrap());
    let o = sampdev(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), VERIFY_COLUMNS.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let x0 = rows.iter().find(|r| r[5] == "0.0").unwrap();
    let p_limit: f64 = x0[15].parse().unwrap();
    assert!((p_limit - 0.135335).abs() < 5e-7);
    assert_eq!(x0[17], "exact-block-max");

    let m = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(m.master_seed, 11);
    assert_eq!(m.seed_source, SeedSource::Flag);
    assert_eq!(m.results.len(), 1);
    assert_eq!(m.results[0].file, "verify.csv");
    assert_eq!(m.results[0].rows, 4);
    assert_eq!(m.config["args"]["process"], "bm");
}

#[test]
fn verify_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let mut args = BM_VERIFY.to_vec();
        args.push(out.to_str().unwrap());
        args.extend(["--threads", threads]);
        let o = sampdev(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("verify.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "8");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn verify_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = BM_VERIFY.to_vec();
    args.push(out);
    assert_eq!(sampdev(&args).status.code(), Some(0));
    let before = fs::read(dir.path().join("verify.csv")).unwrap();
    let o = sampdev(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--force"));
    assert_eq!(fs::read(dir.path().join("verify.csv")).unwrap(), before);
    args.push("--force");
    assert_eq!(sampdev(&args).status.code(), Some(0));
}

#[test]
fn verify_without_seed_records_entropy_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sampdev(&["verify", "--process", "bm", "--epsilon", "0.1", "--n-paths", "200", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = RunManifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.seed_source, SeedSource::Entropy);
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let seed: u64 = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(seed, m.master_seed);
}

#[test]
fn verify_resource_cap_exits_two() {
    let o = sampdev(&[
        "verify", "--process", "bm", "--sided", "2", "--epsilon", "0.01", "--n-paths", "10", "--path-cap", "100",
        "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("resource"), "{}", stderr(&o));
}

#[test]
fn verify_fixed_q_reports_fixed_epsilon_limit() {
    let o = sampdev(&[
        "verify", "--process", "stable", "--alpha", "1.2", "--beta", "0", "--epsilon", "1", "--q", "0.0078125",
        "--refine-m", "16", "--n-paths", "200", "--seed", "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let p_limit: f64 = row[15].parse().unwrap();
    assert!((p_limit - 0.7574).abs() < 1e-3, "{p_limit}");
}

#[test]
fn verify_reads_config_file_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "process = \"bm\"\nepsilon = [0.1]\nx = [0.0, 1.0]\nn-paths = 300\nseed = 4\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = sampdev(&["verify", "--config", c]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",300,64,"));

    let o = sampdev(&["verify", "--config", c, "--n-paths", "150", "--x", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains(",150,64,"));

    fs::write(&cfg, "process = \"bm\"\nepsilonn = [0.1]\n").unwrap();
    assert_eq!(sampdev(&["verify", "--config", c]).status.code(), Some(1));
}

#[test]
fn negative_grid_values_parse() {
    let o = sampdev(&["verify", "--process", "bm", "--epsilon", "0.1", "--x", "-1,0", "--n-paths", "100", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().contains(",-1.0,"), "{text}");
}

#[test]
fn probe_rows_and_empty_schedule() {
    let o = sampdev(&[
        "probe", "--process", "stable", "--alpha", "1.5", "--epsilon", "1e-3,1e-4,1e-5,1e-6", "--x", "0", "--r", "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[4], 1.0);
        assert_eq!(r[5], 1.0);
    }
    let gaps: Vec<f64> = rows.iter().map(|r| (r[3] - 1.0).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");

    let dir = tempfile::tempdir().unwrap();
    let o = sampdev(&["probe", "--process", "lfsm", "--alpha", "1.5", "--hurst", "0.8", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("probe.csv")).unwrap();
    assert_eq!(csv, "process,epsilon,x,r,ratio31,ratio32,ratio33,target31,target32,target33\n");
}

#[test]
fn quantile_sim_is_deterministic() {
    let args = ["quantile", "sim", "--process", "bm", "--p", "0.05", "--epsilon", "0.05", "--x", "0", "--seed", "7", "--n-paths", "4000"];
    let a = sampdev(&args);
    let b = sampdev(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("P{sup > u} ≤ 2p = 0.1"), "{text}");
    assert!(text.contains("MC interval"));
    let u = value(&text, "u");
    assert!(u > 1.7 && u < 2.2, "{u}");
}

#[test]
fn quantile_rejects_p_zero() {
    let o = sampdev(&["quantile", "sim", "--process", "bm", "--p", "0", "--epsilon", "0.05"]);
    assert_eq!(o.status.code(), Some(1));
}

fn exponential_table(path: &Path) {
    let mut text = String::from("# P{X > u} = exp(-u)\n");
    for i in 0..=40 {
        let u = i as f64 * 0.5;
        text.push_str(&format!("{u},{}\n", (-u).exp()));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn quantile_stationary_matches_exponential_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("tail.csv");
    exponential_table(&table);
    let before = fs::read(&table).unwrap();
    let (p, eps, q, w, x) = (0.01, 0.1, 0.001, 0.02, 0.5);
    let o = sampdev(&[
        "quantile", "stationary", "--table", table.to_str().unwrap(), "--p", "0.01", "--epsilon", "0.1", "--q", "0.001",
        "--w", "0.02", "--x", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let d: f64 = eps + x * w;
    let u_exact = ((1.0 / q + 1.0) * d.exp() / p).ln();
    let u = value(&text, "u");
    assert!((u / u_exact - 1.0).abs() < 1e-9, "{u} vs {u_exact}");
    assert!((value(&text, "y") - d).abs() < 1e-9);
    assert!(text.contains("P{sup > u} ≤ 2p = 0.02"));
    assert_eq!(fs::read(&table).unwrap(), before);
}

#[test]
fn quantile_stationary_bad_table_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("tail.csv");
    fs::write(&table, "0,0.5\n1,0.6\n").unwrap();
    let o = sampdev(&[
        "quantile", "stationary", "--table", table.to_str().unwrap(), "--p", "0.01", "--epsilon", "0.1", "--q", "0.001",
        "--w", "0.02", "--x", "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
