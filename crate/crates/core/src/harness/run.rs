use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{csv_header, csv_line, FitSummary, Gate, ReportRow, RunMeta, RunReport};
use crate::charfn::{iid_rate_point, iid_sum_ks_bound, IidBase, IidRateConfig, ScanOptions, ScanStatus};
use crate::dpp::{
    default_resolution, dpp_clt_row, Density, predicted_variance_exponent, variance_row, DppBackend, DppCltConfig,
    KernelFamily, KernelSpec, TabulatedFunction, TabulatedKernel, TestFunction,
};
use crate::error::{Error, Result};
use crate::registry::{isotropic_coupling, kernel_from_name};
use crate::spin::{lee_yang_zeros, spin_clt_row, Lattice, MetropolisConfig, SpinCltConfig, SpinFamily, SpinMeasure, SpinModel};

/// Where and how to run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for sweep points; 0 picks the number of CPUs.
    pub jobs: usize,
    /// Skip writing CSV and JSON files.
    pub in_memory: bool,
}

type PointFn<'a> = Box<dyn Fn(usize) -> Result<Vec<Option<f64>>> + Send + Sync + 'a>;

/// Fits, scalar summaries and gates derived from finished rows.
struct Outcome {
    fits: Vec<FitSummary>,
    summary: BTreeMap<String, f64>,
    gates: Vec<Gate>,
}

type FinishFn<'a> = Box<dyn Fn(&Table) -> Outcome + 'a>;

struct Plan<'a> {
    sweep: Vec<f64>,
    columns: Vec<&'static str>,
    point: PointFn<'a>,
    finish: FinishFn<'a>,
}

/// Finished rows with by-name column access.
struct Table<'a> {
    columns: &'a [&'static str],
    rows: &'a [ReportRow],
}

impl Table<'_> {
    fn ok_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.error.is_none())
    }

    fn col(&self, name: &str) -> usize {
        self.columns.iter().position(|c| *c == name).expect("known column")
    }

    /// `(sweep, value)` for rows where the column is present.
    fn series(&self, name: &str) -> (Vec<f64>, Vec<f64>) {
        let c = self.col(name);
        self.ok_rows().filter_map(|r| r.values[c].map(|v| (r.sweep, v))).unzip()
    }

    fn fit(&self, name: &str) -> Option<FitSummary> {
        let (xs, ys) = self.series(name);
        let ys: Vec<f64> = ys.iter().map(|v| v.abs()).collect();
        FitSummary::log_log(name, &xs, &ys)
    }

    fn complete_gate(&self) -> Gate {
        let failed = self.rows.iter().filter(|r| r.error.is_some()).count();
        Gate::new(
            "rows_complete",
            "every sweep point was evaluated without error",
            failed == 0 && !self.rows.is_empty(),
            Some(failed as f64),
        )
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn in_range(fit: &Option<FitSummary>, lo: f64, hi: f64) -> (bool, Option<f64>) {
    match fit {
        Some(f) => (f.slope >= lo && f.slope <= hi, Some(f.slope)),
        None => (false, None),
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn iid_base(config: &ExperimentConfig) -> Result<IidBase> {
    Ok(match config.text("iid.base")? {
        "bernoulli" => IidBase::Bernoulli { p: config.f64("iid.p")? },
        _ => IidBase::Rademacher,
    })
}

/// Kernel described by the `dpp.*` keys.
pub fn kernel_from_config(config: &ExperimentConfig) -> Result<KernelSpec> {
    let dim = config.usize("dpp.dim")?;
    let alpha = config.f64("dpp.alpha")?;
    let amplitude = config.opt_f64("dpp.amplitude")?;
    let spec = match config.text("dpp.kernel")? {
        "tabulated" => {
            let table = TabulatedKernel::from_file(config.text("dpp.kernel_file")?)?;
            KernelSpec::new(table.grid.dim(), KernelFamily::Tabulated(table), Density::Constant { value: 1.0 }, alpha)?
        }
        family => {
            let rank = config.get("dpp.rank").map(|_| config.usize("dpp.rank")).transpose()?;
            kernel_from_name(family, dim, amplitude, config.f64("dpp.length")?, rank, alpha)?
        }
    };
    Ok(match config.opt_f64("dpp.decay_beta")? {
        Some(b) => spec.with_decay_beta(b),
        None => spec,
    })
}

/// Test function described by `dpp.phi` (and `dpp.phi_file`).
pub fn test_function_from_config(config: &ExperimentConfig) -> Result<TestFunction> {
    Ok(match config.text("dpp.phi")? {
        "indicator" => TestFunction::Indicator,
        "constant" => TestFunction::Constant,
        "tabulated" => TestFunction::Tabulated(TabulatedFunction::from_file(config.text("dpp.phi_file")?)?),
        _ => TestFunction::Bump,
    })
}

fn iid_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let ns = sorted_unique(config.u64_list("iid.ns")?.into_iter().map(|n| n as f64).collect());
    let rate = IidRateConfig {
        base: iid_base(config)?,
        ns: ns.iter().map(|&n| n as u32).collect(),
        samples: config.usize("iid.samples")?,
        seed: config.seed().unwrap_or(0),
        radius_scale: config.f64("iid.radius_scale")?,
        scan: ScanOptions::default(),
    };
    let (lo, hi) = (config.f64("tolerance.slope_min")?, config.f64("tolerance.slope_max")?);
    let sweep = ns.clone();
    Ok(Plan {
        sweep,
        columns: vec![
            "sampled_ks",
            "studentized_ks",
            "exact_ks",
            "kappa",
            "bracket_term",
            "sigma_term",
            "zero_free_radius",
        ],
        point: Box::new(move |i| {
            let row = iid_rate_point(&rate, i, ns[i] as u32)?;
            Ok(vec![
                Some(row.sampled_ks),
                row.studentized_ks,
                Some(row.exact_ks),
                Some(row.kappa),
                Some(row.report.bracket_term),
                Some(row.report.sigma_term),
                finite(row.report.zero_free_radius),
            ])
        }),
        finish: Box::new(move |t| {
            let (c_s, c_e, c_b, c_g) = (t.col("sampled_ks"), t.col("exact_ks"), t.col("bracket_term"), t.col("sigma_term"));
            let get = |r: &ReportRow, c: usize| r.values[c].unwrap_or(f64::NAN);
            let mut summary = BTreeMap::new();
            let mut covered = false;
            if let Some(first) = t.ok_rows().next() {
                let target = get(first, c_e).max(get(first, c_s));
                let a = (target - get(first, c_g)).max(0.0) / get(first, c_b);
                summary.insert("calibrated_a".into(), a);
                covered = t.ok_rows().all(|r| {
                    let bound = get(r, c_g) + a * get(r, c_b);
                    get(r, c_e) <= bound * (1.0 + 1e-12) && get(r, c_s) <= bound * (1.0 + 1e-12)
                });
            }
            let fit = t.fit("sampled_ks");
            let (ok, slope) = in_range(&fit, lo, hi);
            let mut fits: Vec<FitSummary> = fit.into_iter().collect();
            fits.extend(t.fit("exact_ks"));
            Outcome {
                fits,
                summary,
                gates: vec![
                    Gate::new(
                        "ks_slope_in_range",
                        format!("log-log slope of sampled KS against n lies in [{lo}, {hi}]"),
                        ok,
                        slope,
                    ),
                    Gate::new(
                        "calibrated_bound_covers_ks",
                        "with A calibrated at the smallest n, the bound covers exact and sampled KS at every n",
                        covered,
                        None,
                    ),
                    t.complete_gate(),
                ],
            }
        }),
    })
}

fn audit_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let ns = sorted_unique(config.u64_list("iid.ns")?.into_iter().map(|n| n as f64).collect());
    let base = iid_base(config)?;
    let scale = config.f64("iid.radius_scale")?;
    let a = config.f64("iid.constant_a")?;
    Ok(Plan {
        sweep: ns.clone(),
        columns: vec!["exact_ks", "bound", "bracket_term", "log_circle_max", "zero_free_radius"],
        point: Box::new(move |i| {
            let n = ns[i] as u32;
            let report = iid_sum_ks_bound(&base.model(), n, scale * (n as f64).sqrt(), a, &ScanOptions::default())?;
            Ok(vec![
                Some(base.exact_ks(n)?),
                Some(report.bound),
                Some(report.bracket_term),
                finite(report.log_circle_max),
                finite(report.zero_free_radius),
            ])
        }),
        finish: Box::new(move |t| {
            let (e, b) = (t.col("exact_ks"), t.col("bound"));
            let dominated = t.ok_rows().count() > 0
                && t.ok_rows().all(|r| matches!((r.values[e], r.values[b]), (Some(x), Some(y)) if x <= y));
            let worst = t
                .ok_rows()
                .filter_map(|r| Some(r.values[e]? / r.values[b]?))
                .fold(0.0, f64::max);
            Outcome {
                fits: t.fit("exact_ks").into_iter().chain(t.fit("bound")).collect(),
                summary: BTreeMap::from([("max_ks_over_bound".to_string(), worst)]),
                gates: vec![
                    Gate::new(
                        "bound_dominates_exact_ks",
                        format!("KS bound with A = {a} is at least the exact KS distance at every n"),
                        dominated,
                        Some(worst),
                    ),
                    t.complete_gate(),
                ],
            }
        }),
    })
}

fn spin_family(config: &ExperimentConfig) -> Result<SpinFamily> {
    let measure = match config.text("spin.measure")? {
        "circle" => SpinMeasure::Circle,
        "sphere" => SpinMeasure::Sphere,
        _ => SpinMeasure::Ising,
    };
    let coupling = isotropic_coupling(&measure, config.f64("spin.j")?);
    Ok(SpinFamily {
        dim: config.usize("spin.dim")?,
        periodic: config.bool("spin.periodic")?,
        measure,
        coupling,
        field: [config.f64("spin.h")?, 0.0, 0.0],
        beta: config.f64("spin.beta")?,
        quadrature: Default::default(),
    })
}

fn sides_sweep(config: &ExperimentConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    let dim = config.usize("spin.dim")? as i32;
    let mut sides: Vec<usize> = config.u64_list("spin.sides")?.into_iter().map(|s| s as usize).collect();
    sides.sort_unstable();
    sides.dedup();
    let sweep = sides.iter().map(|&s| (s as f64).powi(dim)).collect();
    Ok((sides, sweep))
}

fn spin_clt_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let family = spin_family(config)?;
    let (sides, sweep) = sides_sweep(config)?;
    let clt = SpinCltConfig {
        sizes: sides.clone(),
        mc: MetropolisConfig {
            n_samples: config.usize("spin.samples")?,
            burn_in: config.usize("spin.burn_in")?,
            thinning: config.usize("spin.thinning")?,
            seed: config.seed().unwrap_or(0),
            chains: config.usize("spin.chains")?,
            proposal_width: config.f64("spin.proposal_width")?,
        },
        radius_fraction: config.f64("spin.radius_fraction")?,
        constant_a: config.f64("spin.constant_a")?,
    };
    let tol = |k: &str| config.f64(&format!("tolerance.{k}"));
    let (vlo, vhi) = (tol("variance_exponent_min")?, tol("variance_exponent_max")?);
    let (klo, khi) = (tol("ks_exponent_min")?, tol("ks_exponent_max")?);
    let ess_floor = tol("min_effective_samples")?;
    Ok(Plan {
        sweep,
        columns: vec![
            "side",
            "mean",
            "variance",
            "exact_variance",
            "effective_samples",
            "acceptance_rate",
            "ks",
            "ks_centered",
            "bound",
            "log_circle_max",
        ],
        point: Box::new(move |i| {
            let row = spin_clt_row(&family, &clt, i, sides[i])?;
            Ok(vec![
                Some(row.side as f64),
                Some(row.mean),
                Some(row.variance),
                row.exact_variance,
                Some(row.effective_samples),
                Some(row.acceptance_rate),
                Some(row.ks),
                Some(row.ks_centered),
                finite(row.report.bound),
                finite(row.report.log_circle_max),
            ])
        }),
        finish: Box::new(move |t| {
            let var_fit = t.fit("variance");
            let ks_fit = t.fit("ks");
            let (var_ok, var_slope) = in_range(&var_fit, vlo, vhi);
            let (ks_ok, ks_slope) = in_range(&ks_fit, klo, khi);
            let (_, kss) = t.series("ks");
            let decreasing = kss.len() >= 2 && kss.windows(2).all(|w| w[1] < w[0]);
            let (_, ess) = t.series("effective_samples");
            let min_ess = ess.iter().copied().fold(f64::INFINITY, f64::min);
            Outcome {
                fits: var_fit.into_iter().chain(ks_fit).collect(),
                summary: BTreeMap::new(),
                gates: vec![
                    Gate::new(
                        "variance_exponent_in_range",
                        format!("log-log slope of Var S against |Λ| lies in [{vlo}, {vhi}]"),
                        var_ok,
                        var_slope,
                    ),
                    Gate::new("ks_decreasing", "KS distance decreases strictly with |Λ|", decreasing, None),
                    Gate::new(
                        "ks_exponent_in_range",
                        format!("log-log slope of KS against |Λ| lies in [{klo}, {khi}]"),
                        ks_ok,
                        ks_slope,
                    ),
                    Gate::new(
                        "effective_samples_floor",
                        format!("effective sample size is at least {ess_floor} at every size"),
                        !ess.is_empty() && min_ess >= ess_floor,
                        finite(min_ess),
                    ),
                    t.complete_gate(),
                ],
            }
        }),
    })
}

fn leeyang_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let (sides, sweep) = sides_sweep(config)?;
    let dim = config.usize("spin.dim")?;
    let periodic = config.bool("spin.periodic")?;
    let (j, h, beta) = (config.f64("spin.j")?, config.f64("spin.h")?, config.f64("spin.beta")?);
    let tol = config.f64("tolerance.unit_circle")?;
    Ok(Plan {
        sweep,
        columns: vec![
            "side",
            "zeros",
            "max_unit_circle_deviation",
            "zero_free_field_radius",
            "nearest_zero_re",
            "nearest_zero_im",
        ],
        point: Box::new(move |i| {
            let model = SpinModel::ising(Lattice::new(dim, sides[i], periodic)?, j, h, beta)?;
            let rep = lee_yang_zeros(&model)?;
            Ok(vec![
                Some(sides[i] as f64),
                Some(rep.fugacity_zeros.len() as f64),
                Some(rep.max_abs_deviation_from_unit_circle),
                finite(rep.zero_free_field_radius),
                finite(rep.nearest_charfn_zero.re),
                finite(rep.nearest_charfn_zero.im),
            ])
        }),
        finish: Box::new(move |t| {
            let (_, dev) = t.series("max_unit_circle_deviation");
            let worst = dev.iter().copied().fold(0.0, f64::max);
            let gate = if j > 0.0 {
                Gate::new(
                    "zeros_on_unit_circle",
                    format!("ferromagnetic: every fugacity zero lies within {tol:e} of |z| = 1"),
                    !dev.is_empty() && worst <= tol,
                    Some(worst),
                )
            } else {
                Gate::new(
                    "zeros_leave_unit_circle",
                    format!("antiferromagnetic control: some fugacity zero lies farther than {tol:e} from |z| = 1"),
                    worst > tol,
                    Some(worst),
                )
            };
            Outcome {
                fits: vec![],
                summary: BTreeMap::new(),
                gates: vec![gate, t.complete_gate()],
            }
        }),
    })
}

fn dpp_clt_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let spec = kernel_from_config(config)?;
    let phi = test_function_from_config(config)?;
    let scales = sorted_unique(config.f64_list("dpp.scales")?);
    let scan = config.bool("dpp.scan")?;
    let clt = DppCltConfig {
        scales: scales.clone(),
        backend: match config.text("dpp.backend")? {
            "sampling" => DppBackend::Sampling,
            _ => DppBackend::Cumulant,
        },
        seed: config.seed().unwrap_or(0),
        resolution: Some(config.opt_f64("dpp.resolution")?.unwrap_or_else(|| default_resolution(&spec))),
        samples: config.usize("dpp.samples")?,
        scan,
        scan_radius: config.f64("dpp.scan_radius")?,
        scan_step: config.f64("dpp.scan_step")?,
        scan_rel_tol: config.f64("dpp.scan_rel_tol")?,
    };
    let final_tol = config.f64("tolerance.final_skewness")?;
    let spread_tol = config.f64("tolerance.zero_free_spread")?;
    let resolution = clt.resolution.unwrap_or(0.0);
    Ok(Plan {
        sweep: scales.clone(),
        columns: vec![
            "points",
            "mean",
            "variance",
            "skewness",
            "excess_kurtosis",
            "ks",
            "zero_free_radius",
            "scan_certified",
        ],
        point: Box::new(move |i| {
            let row = dpp_clt_row(&spec, &phi, &clt, i, scales[i])?;
            Ok(vec![
                Some(row.points as f64),
                Some(row.mean),
                Some(row.variance),
                Some(row.skewness),
                Some(row.excess_kurtosis),
                row.ks,
                row.zero_free_radius.and_then(finite),
                row.scan_status.map(|s| if s == ScanStatus::Certified { 1.0 } else { 0.0 }),
            ])
        }),
        finish: Box::new(move |t| {
            let (_, skews) = t.series("skewness");
            let decreasing = skews.len() >= 2 && skews.windows(2).all(|w| w[1].abs() < w[0].abs());
            let last = skews.last().map(|s| s.abs());
            let mut summary = BTreeMap::from([("resolution".to_string(), resolution)]);
            let mut gates = vec![
                Gate::new(
                    "skewness_decreasing",
                    "|standardized third cumulant| decreases strictly with L",
                    decreasing,
                    None,
                ),
                Gate::new(
                    "final_skewness_small",
                    format!("|standardized third cumulant| at the largest L is below {final_tol}"),
                    last.is_some_and(|s| s < final_tol),
                    last,
                ),
            ];
            if scan {
                let (_, radii) = t.series("zero_free_radius");
                let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = radii.iter().copied().fold(0.0, f64::max);
                let spread = (hi - lo) / lo;
                let ok = radii.len() == t.rows.len() && lo > 0.0 && spread < spread_tol;
                if let Some(s) = finite(spread) {
                    summary.insert("zero_free_spread".into(), s);
                }
                gates.push(Gate::new(
                    "zero_free_radius_uniform",
                    format!("(max − min)/min of the zero-free radii across L is below {spread_tol}"),
                    ok,
                    finite(spread),
                ));
            }
            gates.push(t.complete_gate());
            let mut fits: Vec<FitSummary> = t.fit("skewness").into_iter().collect();
            fits.extend(t.fit("excess_kurtosis"));
            if t.series("ks").0.len() >= 2 {
                fits.extend(t.fit("ks"));
            }
            Outcome { fits, summary, gates }
        }),
    })
}

fn dpp_variance_plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    let spec = kernel_from_config(config)?;
    spec.validate()?;
    let phi = test_function_from_config(config)?;
    let scales = sorted_unique(config.f64_list("dpp.scales")?);
    let h = config.opt_f64("dpp.resolution")?.unwrap_or_else(|| default_resolution(&spec));
    let tol = config.f64("tolerance.exponent_deviation")?;
    let (predicted, regime) = predicted_variance_exponent(&spec);
    Ok(Plan {
        sweep: scales.clone(),
        columns: vec!["points", "variance", "coarse_variance", "relative_change"],
        point: Box::new(move |i| {
            let row = variance_row(&spec, &phi, scales[i], h)?;
            Ok(vec![
                Some(row.points as f64),
                Some(row.variance),
                Some(row.coarse_variance),
                Some(row.relative_change),
            ])
        }),
        finish: Box::new(move |t| {
            let fit = t.fit("variance");
            let deviation = match (&fit, predicted) {
                (Some(f), Some(p)) => Some((f.slope - p).abs()),
                _ => None,
            };
            let mut summary = BTreeMap::from([("resolution".to_string(), h)]);
            if let Some(p) = predicted {
                summary.insert("predicted_exponent".into(), p);
            }
            Outcome {
                fits: fit.into_iter().collect(),
                summary,
                gates: vec![
                    Gate::new(
                        "variance_exponent_matches_prediction",
                        format!("log-log slope of Var Λ(φ_L) against L is within {tol} of the prediction ({regime})"),
                        deviation.is_some_and(|d| d <= tol),
                        deviation,
                    ),
                    t.complete_gate(),
                ],
            }
        }),
    })
}

fn plan(config: &ExperimentConfig) -> Result<Plan<'static>> {
    match config.kind() {
        ExperimentKind::IidRate => iid_plan(config),
        ExperimentKind::KsBoundAudit => audit_plan(config),
        ExperimentKind::SpinClt => spin_clt_plan(config),
        ExperimentKind::SpinLeeyang => leeyang_plan(config),
        ExperimentKind::DppClt => dpp_clt_plan(config),
        ExperimentKind::DppVariance => dpp_variance_plan(config),
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs an experiment: sweep points execute concurrently on `jobs` threads,
/// CSV rows are appended in sweep order as soon as every earlier row is
/// done, and the JSON report is written atomically at the end. A failing
/// sweep point records its error and the remaining points still run.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let plan = plan(config)?;
    let kind = config.kind();
    let columns: Vec<String> = plan.columns.iter().map(|c| c.to_string()).collect();
    let mut echo = config.echo();
    if let Some(dir) = &opts.out_dir {
        echo.insert("output.dir".into(), dir.display().to_string());
    }
    let csv_path = config.output_path(opts.out_dir.as_deref(), "csv");
    let json_path = config.output_path(opts.out_dir.as_deref(), "json");
    let mut csv = if opts.in_memory {
        None
    } else {
        if let Some(parent) = csv_path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(&csv_path)?;
        f.write_all(csv_header(kind.sweep_name(), &columns).as_bytes())?;
        f.flush()?;
        Some(f)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let n = plan.sweep.len();
    let ncols = columns.len();
    let mut rows: Vec<Option<ReportRow>> = vec![None; n];
    let mut seconds = vec![0.0; n];
    let mut written = 0;
    let mut io_error = None;
    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel();
        let point = &plan.point;
        let pool = &pool;
        s.spawn(move || {
            pool.scope_fifo(|sc| {
                for i in 0..n {
                    let tx = tx.clone();
                    sc.spawn_fifo(move |_| {
                        let t = Instant::now();
                        let out = catch_unwind(AssertUnwindSafe(|| point(i)))
                            .unwrap_or_else(|p| Err(Error::Capability(format!("sweep point panicked: {}", panic_message(p)))));
                        let _ = tx.send((i, out, t.elapsed().as_secs_f64()));
                    });
                }
            });
        });
        for (i, out, secs) in rx {
            let row = match out {
                Ok(values) => ReportRow {
                    sweep: plan.sweep[i],
                    values: values.into_iter().map(|v| v.filter(|x| x.is_finite())).collect(),
                    error: None,
                },
                Err(e) => ReportRow {
                    sweep: plan.sweep[i],
                    values: vec![None; ncols],
                    error: Some(e.to_string()),
                },
            };
            rows[i] = Some(row);
            seconds[i] = secs;
            while written < n {
                let Some(row) = &rows[written] else { break };
                if let Some(f) = csv.as_mut() {
                    if let Err(e) = f.write_all(csv_line(row).as_bytes()).and_then(|_| f.flush()) {
                        io_error.get_or_insert(e);
                    }
                }
                written += 1;
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let rows: Vec<ReportRow> = rows.into_iter().map(|r| r.expect("every sweep point reports")).collect();
    let outcome = (plan.finish)(&Table {
        columns: &plan.columns,
        rows: &rows,
    });
    let report = RunReport {
        kind,
        config: echo,
        sweep: kind.sweep_name().to_string(),
        columns,
        rows,
        fits: outcome.fits,
        summary: outcome.summary,
        gates: outcome.gates,
        meta: RunMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: "ChaCha8; sweep point i draws from stream i of the seed".into(),
            seed: config.seed(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            row_seconds: seconds,
        },
    };
    if !opts.in_memory {
        report.write_json_atomic(&json_path)?;
    }
    Ok(report)
}
