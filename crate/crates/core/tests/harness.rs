use marcin_clt::harness::*;
use marcin_clt::Error;

fn leeyang(sides: &str, j: f64) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "experiment = spin_leeyang\nspin.dim = 2\nspin.j = {j}\nspin.beta = 0.4\nspin.sides = {sides}\n"
    ))
    .unwrap()
}

fn in_memory() -> RunOptions {
    RunOptions {
        in_memory: true,
        jobs: 1,
        ..RunOptions::default()
    }
}

#[test]
fn leeyang_three_by_three_passes_unit_circle_gate() {
    let report = run(&leeyang("3", 1.0), &in_memory()).unwrap();
    let gate = report.gate("zeros_on_unit_circle").unwrap();
    assert!(gate.passed, "{gate:?}");
    assert!(gate.value.unwrap() <= 1e-8);
    assert!(report.all_passed());
    assert_eq!(report.rows[0].sweep, 9.0);
}

#[test]
fn antiferromagnetic_control_leaves_the_circle() {
    let report = run(&leeyang("1, 2", -1.0), &in_memory()).unwrap();
    assert!(report.gate("zeros_leave_unit_circle").unwrap().passed);
}

#[test]
fn missing_seed_names_seed() {
    let err = ExperimentConfig::parse("experiment = spin_clt\nspin.h = 0.2\nspin.beta = 0.5\nspin.sides = 8\n")
        .unwrap_err();
    match err {
        Error::Validation(msgs) => assert!(msgs.iter().any(|m| m.starts_with("seed:")), "{msgs:?}"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn failing_point_is_recorded_and_others_run() {
    // 5×5 = 25 sites exceeds the exact enumeration limit
    let report = run(&leeyang("2, 5, 3", 1.0), &in_memory()).unwrap();
    let sweeps: Vec<f64> = report.rows.iter().map(|r| r.sweep).collect();
    assert_eq!(sweeps, vec![4.0, 9.0, 25.0]);
    assert!(report.rows[0].error.is_none() && report.rows[1].error.is_none());
    assert!(report.rows[2].error.as_deref().unwrap().contains("capability"));
    assert!(!report.gate("rows_complete").unwrap().passed);
    assert!(report.gate("zeros_on_unit_circle").unwrap().passed);
    assert!(!report.all_passed());
}

#[test]
fn files_are_deterministic_and_round_trip() {
    let text = "experiment = iid_rate\nseed = 7\niid.ns = 16, 64, 256\niid.samples = 20000\noutput.name = det\n";
    let config = ExperimentConfig::parse(text).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let opts = |dir: &std::path::Path, jobs| RunOptions {
        out_dir: Some(dir.to_path_buf()),
        jobs,
        in_memory: false,
    };
    let ra = run(&config, &opts(a.path(), 1)).unwrap();
    let rb = run(&config, &opts(b.path(), 2)).unwrap();
    let csv_a = std::fs::read(a.path().join("det.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("det.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(String::from_utf8(csv_a).unwrap(), ra.to_csv());
    assert!(ra.to_csv().starts_with("n,sampled_ks,"));

    let loaded = RunReport::from_json_file(a.path().join("det.json")).unwrap();
    assert_eq!(loaded, ra);
    let strip = |r: &RunReport| {
        let mut r = r.clone();
        r.meta.wall_clock_seconds = 0.0;
        r.meta.row_seconds.clear();
        r.config.remove("output.dir");
        r.to_json().unwrap()
    };
    assert_eq!(strip(&ra), strip(&rb));

    let again = run(&loaded.config().unwrap(), &in_memory()).unwrap();
    assert_eq!(again.gates, ra.gates);
    assert_eq!(again.rows, ra.rows);
    assert!(!a.path().join("det.json.partial").exists());
}

#[test]
fn iid_rate_slope_example() {
    let text = "experiment = iid_rate\nseed = 1\niid.ns = 16, 64, 256, 1024, 4096\n";
    let report = run(&ExperimentConfig::parse(text).unwrap(), &in_memory()).unwrap();
    let slope = report.fit("sampled_ks").unwrap().slope;
    assert!((-0.65..=-0.40).contains(&slope), "{slope}");
    assert!(report.all_passed(), "{:?}", report.gates);
    assert!(report.summary["calibrated_a"] > 0.0);
}

#[test]
fn ks_bound_audit_dominates() {
    let text = "experiment = ks_bound_audit\niid.ns = 4, 16, 64, 256\n";
    let report = run(&ExperimentConfig::parse(text).unwrap(), &in_memory()).unwrap();
    assert!(report.all_passed(), "{:?}", report.gates);
}

#[test]
fn dpp_variance_poisson_is_extensive() {
    let text = "experiment = dpp_variance\ndpp.kernel = gaussian\ndpp.amplitude = 1.5\ndpp.alpha = 0\n\
                dpp.phi = indicator\ndpp.scales = 4, 8, 16\n";
    let report = run(&ExperimentConfig::parse(text).unwrap(), &in_memory()).unwrap();
    assert!((report.fit("variance").unwrap().slope - 1.0).abs() < 1e-9);
    assert_eq!(report.summary["predicted_exponent"], 1.0);
    assert!(report.all_passed());
}

#[test]
fn dpp_clt_poisson_without_scan() {
    let text = "experiment = dpp_clt\ndpp.kernel = gaussian\ndpp.amplitude = 2.5\ndpp.alpha = 0\n\
                dpp.phi = indicator\ndpp.scales = 4, 8, 64\ndpp.scan = false\n";
    let report = run(&ExperimentConfig::parse(text).unwrap(), &in_memory()).unwrap();
    let skews = report.series("skewness").unwrap();
    for (l, s) in skews {
        assert!((s / (5.0 * l).powf(-0.5) - 1.0).abs() < 1e-8, "L = {l}: {s} vs {}", (5.0 * l).powf(-0.5));
    }
    assert!(report.gate("zero_free_radius_uniform").is_none());
    assert!(report.gate("skewness_decreasing").unwrap().passed);
}

#[test]
fn plots() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = ks_bound_audit\niid.ns = 4, 16, 64\n";
    let report = run(&ExperimentConfig::parse(text).unwrap(), &in_memory()).unwrap();
    let path = emit_plot(&report, "exact_ks", dir.path().join("ks.svg")).unwrap();
    let svg = std::fs::read_to_string(path).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("slope −1/2"));

    let lin = emit_plot(&run(&leeyang("2, 3", 1.0), &in_memory()).unwrap(), "zeros", dir.path().join("z.svg"));
    assert!(lin.is_ok());

    assert!(matches!(emit_plot(&report, "nope", dir.path().join("x.svg")), Err(Error::Argument(_))));
    let mut empty = report.clone();
    empty.rows.clear();
    assert!(matches!(emit_plot(&empty, "exact_ks", dir.path().join("e.svg")), Err(Error::Argument(_))));
}
