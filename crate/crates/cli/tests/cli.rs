use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marcin-clt"))
        .args(args)
        .current_dir(dir)
        .env("MARCIN_CLT_JOBS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn run_exit_code_follows_gates() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ok.conf", "experiment = spin_leeyang\nspin.dim = 2\nspin.beta = 0.4\nspin.sides = 2, 3\n");
    let ok = cli(&["run", "ok.conf", "--out", "r"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("PASS zeros_on_unit_circle"));
    assert!(dir.path().join("r/spin_leeyang.csv").exists());
    assert!(dir.path().join("r/spin_leeyang.json").exists());

    // antiferromagnetic control run on a single site stays on the circle, so its gate fails
    write(dir.path(), "af.conf", "experiment = spin_leeyang\nspin.j = -1\nspin.beta = 0.4\nspin.sides = 1\n");
    let fail = cli(&["run", "af.conf", "--out", "r"], dir.path());
    assert_eq!(fail.status.code(), Some(1));
    assert!(stdout(&fail).contains("FAIL zeros_leave_unit_circle"));
}

#[test]
fn invalid_config_lists_every_key() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.conf", "experiment = spin_clt\nspin.sides = 4\nspin.bogus = 1\n");
    let out = cli(&["run", "bad.conf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for key in ["spin.h:", "spin.beta:", "seed:", "spin.bogus:"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }
}

#[test]
fn plot_writes_svg_and_rejects_unknown_metric() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.conf", "experiment = ks_bound_audit\niid.ns = 4, 16, 64\noutput.name = audit\n");
    assert_eq!(cli(&["run", "a.conf"], dir.path()).status.code(), Some(0));
    let plot = cli(&["plot", "audit.json", "--metric", "exact_ks"], dir.path());
    assert!(plot.status.success(), "{}", stderr(&plot));
    let svg = std::fs::read_to_string(dir.path().join("audit_exact_ks.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let bad = cli(&["plot", "audit.json", "--metric", "nope"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("unknown metric"));
}

#[test]
fn charfn_scan_of_rademacher_sum() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["charfn", "scan", "--model", "iid_sum:base=rademacher,n=4", "--radius", "3", "--out", "."],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("charfn_scan.json")).unwrap()).unwrap();
    let r = report["zero_free_radius"].as_f64().unwrap();
    assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-6, "{r}");
    assert!(report.get("winding_numbers").is_some());
}

#[test]
fn charfn_rejects_unknown_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["charfn", "eval", "--model", "cauchy", "--t", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown model"));
}

#[test]
fn spin_exact_from_model_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.txt", "# 2×2 Ising\ndim = 2\nside = 2\nbeta = 0.5\nfield = 0.2\n");
    let out = cli(&["spin", "exact", "--model-file", "m.txt", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("spin_exact.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("side,sites,backend,log_partition,mean,variance"));
    assert!(lines.next().unwrap().starts_with("2,4,Enumeration,"));

    // flags override the file
    let out = cli(&["spin", "leeyang", "--model-file", "m.txt", "--side", "3", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("3,9,9,"));
}

#[test]
fn dpp_poisson_variance_is_volume() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["dpp", "variance", "--alpha", "0", "--phi", "indicator", "--L", "2,4", "--out", "."],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    // unit intensity on [−L, L]
    assert!((rows[0][2] - 4.0).abs() < 1e-9 && (rows[1][2] - 8.0).abs() < 1e-9, "{csv}");
}

#[test]
fn dpp_sample_counts_match_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["dpp", "sample", "--alpha=-1", "--amplitude", "0.28", "--L", "2", "--samples", "4000", "--seed", "3", "--out", "."],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dpp_sample.json")).unwrap()).unwrap();
    let row = &json["rows"][0];
    let (mean, expected) = (row["count_mean"].as_f64().unwrap(), row["expected_count"].as_f64().unwrap());
    // counts have variance at most the mean
    assert!((mean - expected).abs() < 4.0 * (expected / 4000.0).sqrt(), "{mean} vs {expected}");

    let bad = cli(&["dpp", "sample", "--alpha", "0.5", "--L", "2"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("no sampler"));
}

#[test]
fn dpp_decay_check_passes_for_ball_fourier() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["dpp", "decay-check", "--kernel", "ball_fourier:2", "--alpha=-1", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dpp_decay_check.json")).unwrap()).unwrap();
    assert_eq!(json["decay_condition"], serde_json::Value::Bool(true));
}
