//! CLT rate fits and the i.i.d.-sum rate experiment.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::ks::{empirical_ks, ks_against_normal_atoms, KsBoundReport};
use super::model::CharFnModel;
use super::scan::{circle_max, zero_free_radius, ScanOptions};
use crate::error::{Error, Result};
use crate::numeric::rng::stream_rng;
use crate::numeric::stats::{log_log_fit, LinearFit};
use crate::numeric::log_plus_of_log;

/// Power-law fits of KS distance and bound against the scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    /// Same fit applied to `log(bound)`.
    pub bound_fit: LinearFit,
}

/// Least-squares fit of `log(empirical_ks)` and `log(bound)` against `log n`.
pub fn clt_rate_fit(reports: &[(f64, KsBoundReport)]) -> Result<RateFit> {
    if reports.len() < 3 {
        return Err(Error::Argument(format!(
            "rate fit needs at least 3 reports, got {}",
            reports.len()
        )));
    }
    let mut ns: Vec<f64> = reports.iter().map(|r| r.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Argument("scale parameters must be distinct".into()));
    }
    let ns: Vec<f64> = reports.iter().map(|r| r.0).collect();
    let ks = reports
        .iter()
        .map(|(n, r)| {
            r.empirical_ks
                .ok_or_else(|| Error::Argument(format!("report at n = {n} has no empirical KS")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let bounds: Vec<f64> = reports.iter().map(|r| r.1.bound).collect();
    let fit = log_log_fit(&ns, &ks)?;
    let bound_fit = log_log_fit(&ns, &bounds)?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_stderr: fit.slope_stderr,
        bound_fit,
    })
}

/// Bounded summand laws whose sums are binomial, so that both exact and
/// sampled KS distances are cheap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IidBase {
    /// Fair ±1.
    Rademacher,
    /// `{0, 1}` with success probability `p`.
    Bernoulli { p: f64 },
}

impl IidBase {
    fn success_probability(&self) -> f64 {
        match self {
            IidBase::Rademacher => 0.5,
            IidBase::Bernoulli { p } => *p,
        }
    }

    pub fn model(&self) -> CharFnModel {
        match self {
            IidBase::Rademacher => CharFnModel::rademacher(),
            IidBase::Bernoulli { p } => CharFnModel::binomial(1, *p),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.success_probability();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Argument(format!("success probability must lie in (0, 1), got {p}")));
        }
        Ok(())
    }

    /// Standardized value of the sum when `k` summands take their upper value.
    fn standardize(&self, n: u32, k: u64) -> f64 {
        let p = self.success_probability();
        let n = n as f64;
        (k as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
    }

    /// KS distance between the exact law of the standardized `n`-fold sum
    /// and `Φ`.
    pub fn exact_ks(&self, n: u32) -> Result<f64> {
        self.validate()?;
        ks_against_normal_atoms(&self.standardized_sum_atoms(n))
    }

    /// Exact law of the standardized sum as `(x, probability)` atoms.
    fn standardized_sum_atoms(&self, n: u32) -> Vec<(f64, f64)> {
        let p = self.success_probability();
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        (0..=n as u64)
            .map(|k| {
                let lpmf = ln_binomial(n as u64, k) + k as f64 * lp + (n as u64 - k) as f64 * lq;
                (self.standardize(n, k), lpmf.exp())
            })
            .collect()
    }
}

/// KS bound for the standardized sum `Σ_{i≤n} (X_i − E X)/(σ√n)`.
///
/// The sum's moment generating function is `ψ(u/√n)ⁿ` for the standardized
/// summand `ψ`, so the disk scan runs on the summand at radius `r/√n` and
/// `log max_{|u|=r}` is `n` times the summand's log circle maximum. This
/// keeps the computation finite where the sum's own maximum overflows.
pub fn iid_sum_ks_bound(
    base: &CharFnModel,
    n: u32,
    r: f64,
    a: f64,
    opts: &ScanOptions,
) -> Result<KsBoundReport> {
    if n == 0 {
        return Err(Error::Argument("need at least one summand".into()));
    }
    if !(a > 0.0) {
        return Err(Error::Argument(format!("constant A must be positive, got {a}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!("radius must be positive, got {r}")));
    }
    if base.is_degenerate() {
        // the centered sum is identically 0: MGF ≡ 1
        return Ok(KsBoundReport {
            r,
            sigma_term: 2.0,
            bracket_term: 1.0 / r,
            constant_a: a,
            bound: 2.0 + a / r,
            empirical_ks: None,
            log_circle_max: 0.0,
            zero_free_radius: f64::INFINITY,
            scan_status: super::scan::ScanStatus::Certified,
            degenerate: true,
        });
    }
    let summand = base.standardized()?;
    let root_n = (n as f64).sqrt();
    let rho = r / root_n;
    let scan = zero_free_radius(&summand, rho, rho / 16.0, opts)?;
    if scan.zero_free_radius < rho * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "r = {r} exceeds the zero-free radius {} of the standardized sum",
            scan.zero_free_radius * root_n
        )));
    }
    let log_max = n as f64 * circle_max(&summand, rho)?.max_modulus.ln();
    let bracket_term = (1.0 + log_plus_of_log(log_max)) / r;
    Ok(KsBoundReport {
        r,
        sigma_term: 0.0,
        bracket_term,
        constant_a: a,
        bound: a * bracket_term,
        empirical_ks: None,
        log_circle_max: log_max,
        zero_free_radius: scan.zero_free_radius * root_n,
        scan_status: scan.status,
        degenerate: false,
    })
}

/// Parameters of the i.i.d.-sum rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidRateConfig {
    pub base: IidBase,
    pub ns: Vec<u32>,
    /// Monte Carlo draws of the sum per `n`.
    pub samples: usize,
    pub seed: u64,
    /// Radius as a multiple of `√n` in the standardized variable.
    pub radius_scale: f64,
    pub scan: ScanOptions,
}

impl Default for IidRateConfig {
    fn default() -> Self {
        IidRateConfig {
            base: IidBase::Rademacher,
            ns: vec![16, 64, 256, 1024, 4096],
            samples: 1_000_000,
            seed: 0,
            radius_scale: 0.5,
            scan: ScanOptions::default(),
        }
    }
}

/// One sweep point of the i.i.d. experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidRateRow {
    pub n: u32,
    /// KS distance of the sampled sums, centered by their sample mean.
    pub sampled_ks: f64,
    /// Same, also divided by the sample standard deviation.
    pub studentized_ks: Option<f64>,
    /// KS distance of the exact standardized law.
    pub exact_ks: f64,
    /// `log⁺ log E[e^{r|S|}]` for the standardized sum.
    pub kappa: f64,
    /// Bound at the calibrated constant, carrying `sampled_ks`.
    pub report: KsBoundReport,
}

/// Output of [`iid_rate_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IidRateResult {
    pub rows: Vec<IidRateRow>,
    /// Smallest `A` for which the bound covers both the exact and the
    /// sampled KS distance at the smallest `n`.
    pub calibrated_a: f64,
    /// Fit of the sampled KS distances (and of the bound).
    pub fit: RateFit,
    /// Fit of the exact KS distances.
    pub exact_fit: LinearFit,
    /// Bound with the calibrated `A` covers both exact and sampled KS at
    /// every `n`.
    pub bound_holds: bool,
}

/// `log⁺ log Σ p_k e^{r|x_k|}`, via log-sum-exp.
fn kappa(atoms: &[(f64, f64)], r: f64) -> f64 {
    let logs: Vec<f64> = atoms
        .iter()
        .filter(|a| a.1 > 0.0)
        .map(|&(x, p)| p.ln() + r * x.abs())
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_e = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    log_plus_of_log(log_e)
}

fn sampled_sums(base: IidBase, n: u32, samples: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let dist = Binomial::new(n as u64, base.success_probability())
        .map_err(|e| Error::Argument(format!("binomial sampler: {e}")))?;
    let mut rng = stream_rng(seed, stream);
    Ok((0..samples)
        .map(|_| base.standardize(n, dist.sample(&mut rng)))
        .collect())
}

/// KS distance of standardized i.i.d. sums against `Φ` across `n`, with the
/// bound evaluated at `r = radius_scale·√n` and calibrated on the smallest
/// `n`.
pub fn iid_rate_experiment(config: &IidRateConfig) -> Result<IidRateResult> {
    let mut ns = config.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 || ns[0] == 0 {
        return Err(Error::Argument("need at least 3 distinct positive n".into()));
    }
    let rows = ns
        .par_iter()
        .enumerate()
        .map(|(i, &n)| iid_rate_point(config, i, n))
        .collect::<Result<Vec<IidRateRow>>>()?;
    calibrate_iid_rows(rows)
}

/// One sweep point of [`iid_rate_experiment`] with the bound at `A = 1`.
/// Sampling uses stream `index` of the seed.
pub fn iid_rate_point(config: &IidRateConfig, index: usize, n: u32) -> Result<IidRateRow> {
    config.base.validate()?;
    if config.samples == 0 {
        return Err(Error::Argument("need at least one sample per n".into()));
    }
    if !(config.radius_scale > 0.0) {
        return Err(Error::Argument("radius_scale must be positive".into()));
    }
    let r = config.radius_scale * (n as f64).sqrt();
    let report = iid_sum_ks_bound(&config.base.model(), n, r, 1.0, &config.scan)?;
    let atoms = config.base.standardized_sum_atoms(n);
    let exact = ks_against_normal_atoms(&atoms)?;
    let sums = sampled_sums(config.base, n, config.samples, config.seed, index as u64)?;
    let sampled = empirical_ks(&sums)?;
    Ok(IidRateRow {
        n,
        sampled_ks: sampled.centered,
        studentized_ks: sampled.studentized,
        exact_ks: exact,
        kappa: kappa(&atoms, r),
        report: report.with_empirical(sampled.centered),
    })
}

/// Calibrates `A` on the smallest `n` (the bound there equals the larger of
/// the exact and sampled KS distances) and fits the rate.
pub fn calibrate_iid_rows(mut rows: Vec<IidRateRow>) -> Result<IidRateResult> {
    rows.sort_by_key(|r| r.n);
    let first = rows
        .first()
        .ok_or_else(|| Error::Argument("no rows to calibrate".into()))?;
    let target = first.exact_ks.max(first.sampled_ks);
    let calibrated_a = (target - first.report.sigma_term).max(0.0) / first.report.bracket_term;
    for row in &mut rows {
        row.report = row.report.recalibrated(calibrated_a);
    }
    let bound_holds = rows
        .iter()
        .all(|row| row.exact_ks <= row.report.bound * (1.0 + 1e-12) && row.report.holds() == Some(true));
    let fit = clt_rate_fit(&rows.iter().map(|r| (r.n as f64, r.report.clone())).collect::<Vec<_>>())?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let exact: Vec<f64> = rows.iter().map(|r| r.exact_ks).collect();
    Ok(IidRateResult {
        rows,
        calibrated_a,
        fit,
        exact_fit: log_log_fit(&xs, &exact)?,
        bound_holds,
    })
}
