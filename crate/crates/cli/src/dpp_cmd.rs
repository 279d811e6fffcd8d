use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use clap::{Subcommand, ValueEnum};
use marcin_clt::dpp::{
    default_resolution, dpp_clt_experiment, kernel_decay_check, linstat_cumulants, linstat_mean,
    linstat_variance_formula, sample_dpp_many, sample_permanental_cox, sample_poisson, variance_row, DecayParams,
    Density, DiscretizedKernel, DppBackend, DppCltConfig, KernelFamily, KernelSpec, TabulatedFunction,
    TabulatedKernel, TestFunction,
};
use marcin_clt::registry::{kernel_from_name, test_function_from_name};
use marcin_clt::spin::size_seed;
use serde_json::json;

use crate::output::{emit, num, opt, Table};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    action: Action,
    /// `gaussian:length`, `ball_fourier:d`, `projection:rank` or
    /// `custom:file` (tabulated kernel).
    #[arg(long, global = true, default_value = "gaussian:1")]
    kernel: String,
    /// Kernel amplitude (Gaussian peak value or ball-Fourier scale).
    #[arg(long, global = true)]
    amplitude: Option<f64>,
    /// Dimension for the Gaussian and projection kernels.
    #[arg(long, global = true, default_value_t = 1)]
    dim: usize,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// `indicator`, `bump`, `constant` or `custom:file` (tabulated).
    #[arg(long, global = true, default_value = "bump")]
    phi: String,
    /// Comma-separated scales L.
    #[arg(long = "L", global = true, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Grid cell side; defaults to a quarter correlation length.
    #[arg(long, global = true)]
    grid_res: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo configurations per scale.
    #[arg(long, global = true, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Cumulant,
    Sampling,
}

#[derive(Subcommand)]
enum Action {
    /// Mean, variance, κ₃ and κ₄ of the linear statistic from the
    /// Fredholm determinant.
    Cumulants,
    /// Variance formula at each scale, checked against a grid twice as coarse.
    Variance,
    /// Polynomial decay audit of the kernel.
    DecayCheck {
        /// Decay exponent; defaults to the kernel's own (ball Fourier) or 1.5.
        #[arg(long)]
        decay_beta: Option<f64>,
    },
    /// Configurations of the process (α ∈ {−1, 0, 2}) and the empirical
    /// moments of the linear statistic.
    Sample,
    /// Standardized cumulants and zero-free radii across scales.
    Clt {
        #[arg(long, value_enum, default_value = "cumulant")]
        backend: Backend,
        /// Skip the zero-free radius scan.
        #[arg(long)]
        no_scan: bool,
        #[arg(long, default_value_t = 8.0)]
        scan_radius: f64,
    },
}

fn kernel(args: &Args) -> Result<KernelSpec> {
    let alpha = args.alpha.ok_or_else(|| anyhow!("--alpha is required"))?;
    let (family, param) = args.kernel.split_once(':').unwrap_or((&args.kernel, ""));
    let number = |what: &str| -> Result<f64> {
        param
            .parse::<f64>()
            .map_err(|_| anyhow!("--kernel {family}:{param}: {what} must be a number"))
    };
    Ok(match family {
        "gaussian" => {
            let length = if param.is_empty() { 1.0 } else { number("length")? };
            kernel_from_name("gaussian", args.dim, args.amplitude, length, None, alpha)?
        }
        "ball_fourier" => {
            let dim = if param.is_empty() { args.dim } else { number("dimension")? as usize };
            kernel_from_name("ball_fourier", dim, args.amplitude, 1.0, None, alpha)?
        }
        "projection" => kernel_from_name("projection", args.dim, None, 1.0, Some(number("rank")? as usize), alpha)?,
        "custom" => {
            let table = TabulatedKernel::from_file(param)?;
            KernelSpec::new(table.grid.dim(), KernelFamily::Tabulated(table), Density::Constant { value: 1.0 }, alpha)?
        }
        other => bail!("unknown kernel {other:?}; expected gaussian, ball_fourier, projection or custom"),
    })
}

fn test_function(args: &Args) -> Result<TestFunction> {
    Ok(match args.phi.split_once(':') {
        Some(("custom", file)) => TestFunction::Tabulated(TabulatedFunction::from_file(file)?),
        _ => test_function_from_name(&args.phi)?,
    })
}

fn scales(args: &Args) -> Result<Vec<f64>> {
    let s = args.scales.clone().ok_or_else(|| anyhow!("--L is required"))?;
    if let Some(bad) = s.iter().find(|l| !(**l > 0.0)) {
        bail!("--L: scales must be positive, got {bad}");
    }
    Ok(s)
}

pub fn main(args: Args) -> Result<()> {
    let spec = kernel(&args)?;
    let phi = test_function(&args)?;
    let h = args.grid_res.unwrap_or_else(|| default_resolution(&spec));
    let alpha = spec.alpha;
    match &args.action {
        Action::Cumulants => {
            let mut table =
                Table::new(vec!["L", "points", "mean", "variance", "kappa3", "kappa4", "skewness", "excess_kurtosis"]);
            let mut rows = Vec::new();
            for l in scales(&args)? {
                let dk = DiscretizedKernel::for_statistic(&spec, &phi, l, h)?;
                let values = dk.sample_function(&phi, l);
                let mut c = linstat_cumulants(&dk, &values, alpha, None)?;
                c.scale = Some(l);
                table.push(vec![
                    num(l),
                    dk.len().to_string(),
                    num(c.mean),
                    num(c.variance),
                    num(c.kappa3),
                    num(c.kappa4),
                    num(c.skewness),
                    num(c.excess_kurtosis),
                ]);
                rows.push(c);
            }
            emit(&args.out, "dpp_cumulants", &table, &json!({"kernel": spec, "resolution": h, "rows": rows}))?;
        }
        Action::Variance => {
            let mut table = Table::new(vec!["L", "points", "variance", "coarse_variance", "relative_change"]);
            let mut rows = Vec::new();
            for l in scales(&args)? {
                let r = variance_row(&spec, &phi, l, h)?;
                table.push(vec![
                    num(l),
                    r.points.to_string(),
                    num(r.variance),
                    num(r.coarse_variance),
                    num(r.relative_change),
                ]);
                rows.push(r);
            }
            emit(&args.out, "dpp_variance", &table, &json!({"kernel": spec, "resolution": h, "rows": rows}))?;
        }
        Action::DecayCheck { decay_beta } => {
            // the ball-Fourier constants are for amplitude 1; c₁ scales with it
            let mut params = match spec.family {
                KernelFamily::BallFourier { amplitude } => {
                    let p = DecayParams::ball_fourier(spec.dim);
                    DecayParams { c1: p.c1 * amplitude, ..p }
                }
                _ => DecayParams::default(),
            };
            if let Some(b) = decay_beta.or(spec.decay_beta) {
                params.decay_beta = b;
            }
            let report = kernel_decay_check(&spec, &params, args.seed)?;
            let mut table = Table::new(vec!["n", "fraction", "std_error", "passes"]);
            for a in &report.annuli {
                table.push(vec![a.n.to_string(), num(a.fraction), num(a.std_error), a.passes.to_string()]);
            }
            emit(&args.out, "dpp_decay_check", &table, &serde_json::to_value(&report)?)?;
        }
        Action::Sample => {
            let mut table = Table::new(vec![
                "L",
                "points",
                "samples",
                "count_mean",
                "expected_count",
                "linstat_mean",
                "expected_mean",
                "linstat_variance",
                "expected_variance",
            ]);
            let mut rows = Vec::new();
            for (i, l) in scales(&args)?.into_iter().enumerate() {
                let dk = DiscretizedKernel::for_statistic(&spec, &phi, l, h)?;
                let values = dk.sample_function(&phi, l);
                let seed = size_seed(args.seed, i);
                let configs = match alpha {
                    a if a == -1.0 => sample_dpp_many(&dk, args.samples, seed)?,
                    a if a == 0.0 => sample_poisson(&dk, args.samples, seed),
                    a if a == 2.0 => sample_permanental_cox(&dk, a, args.samples, seed)?,
                    a => bail!("no sampler for α = {a}; samplers cover α ∈ {{−1, 0, 2}}"),
                };
                let n = configs.len().max(1) as f64;
                let count_mean = configs.iter().map(|c| c.len() as f64).sum::<f64>() / n;
                let stats: Vec<f64> = configs.iter().map(|c| c.iter().map(|&k| values[k]).sum()).collect();
                let mean = stats.iter().sum::<f64>() / n;
                let var = stats.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let (em, ev) = (linstat_mean(&dk, &values)?, linstat_variance_formula(&dk, &values, alpha)?);
                table.push(vec![
                    num(l),
                    dk.len().to_string(),
                    configs.len().to_string(),
                    num(count_mean),
                    num(dk.trace()),
                    num(mean),
                    num(em),
                    num(var),
                    num(ev),
                ]);
                rows.push(json!({"L": l, "seed": seed, "count_mean": count_mean, "expected_count": dk.trace(),
                    "linstat_mean": mean, "expected_mean": em, "linstat_variance": var, "expected_variance": ev}));
            }
            emit(&args.out, "dpp_sample", &table, &json!({"kernel": spec, "resolution": h, "rows": rows}))?;
        }
        Action::Clt {
            backend,
            no_scan,
            scan_radius,
        } => {
            let config = DppCltConfig {
                scales: scales(&args)?,
                backend: match backend {
                    Backend::Cumulant => DppBackend::Cumulant,
                    Backend::Sampling => DppBackend::Sampling,
                },
                seed: args.seed,
                resolution: Some(h),
                samples: args.samples,
                scan: !no_scan,
                scan_radius: *scan_radius,
                ..DppCltConfig::default()
            };
            let result = dpp_clt_experiment(&spec, &phi, &config)?;
            let mut table = Table::new(vec![
                "L",
                "points",
                "mean",
                "variance",
                "skewness",
                "excess_kurtosis",
                "ks",
                "zero_free_radius",
            ]);
            for r in &result.rows {
                table.push(vec![
                    num(r.scale),
                    r.points.to_string(),
                    num(r.mean),
                    num(r.variance),
                    num(r.skewness),
                    num(r.excess_kurtosis),
                    opt(r.ks),
                    opt(r.zero_free_radius),
                ]);
            }
            emit(
                &args.out,
                "dpp_clt",
                &table,
                &json!({"kernel": spec, "config": config, "result": result}),
            )?;
        }
    }
    Ok(())
}
