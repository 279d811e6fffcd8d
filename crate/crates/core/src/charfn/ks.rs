//! Kolmogorov–Smirnov distances to the standard normal and the
//! zero-free-disk upper bound.

use serde::{Deserialize, Serialize};

use super::model::CharFnModel;
use super::scan::{circle_max, zero_free_radius, ScanOptions, ScanStatus};
use crate::error::{Error, Result};
use crate::numeric::quadrature::gauss_legendre;
use crate::numeric::stats::normal_cdf;
use crate::numeric::{log_plus_of_log, Complex64};

/// KS distances of a sample to `Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalKs {
    /// `sup |F_n − Φ|` after subtracting the sample mean.
    pub centered: f64,
    /// Same after also dividing by the sample standard deviation; absent for
    /// a constant sample.
    pub studentized: Option<f64>,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub n: usize,
}

/// `sup_x |F(x) − Φ(x)|` for a law with finitely many atoms `(x, p)`.
///
/// Between atoms `F` is flat and `Φ` monotone, so the supremum is attained
/// at an atom, on one side of its jump.
pub fn ks_against_normal_atoms(atoms: &[(f64, f64)]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::Argument("no atoms".into()));
    }
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below = 0.0;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i].0;
        let mut mass = 0.0;
        while i < sorted.len() && sorted[i].0 == x {
            mass += sorted[i].1;
            i += 1;
        }
        let phi = normal_cdf(x);
        sup = sup.max((below - phi).abs()).max((below + mass - phi).abs());
        below += mass;
    }
    Ok(sup)
}

/// `sup_x |F(x) − Φ(x)|` for a continuous CDF, by dense evaluation on
/// `[lo, hi]` (`n` points) plus the tails at the interval ends.
pub fn ks_against_normal_cdf(cdf: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<f64> {
    if !(hi > lo) || n < 2 {
        return Err(Error::Argument("need hi > lo and at least two points".into()));
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let x = lo + k as f64 * h;
            (cdf(x) - normal_cdf(x)).abs()
        })
        .fold(0.0, f64::max))
}

fn ks_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let start = i;
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
        let phi = normal_cdf(x);
        sup = sup
            .max((start as f64 / n - phi).abs())
            .max((i as f64 / n - phi).abs());
    }
    sup
}

/// Exact KS distance between the empirical CDF of the mean-subtracted
/// samples and `Φ`, plus the studentized variant.
pub fn empirical_ks(samples: &[f64]) -> Result<EmpiricalKs> {
    if samples.is_empty() {
        return Err(Error::Argument("empirical_ks needs at least one sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    centered.sort_by(f64::total_cmp);
    let var = if n > 1 {
        centered.iter().map(|x| x * x).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    let ks_c = ks_sorted(&centered);
    let studentized = if sd > 0.0 {
        let scaled: Vec<f64> = centered.iter().map(|x| x / sd).collect();
        Some(ks_sorted(&scaled))
    } else {
        None
    };
    Ok(EmpiricalKs {
        centered: ks_c,
        studentized,
        sample_mean: mean,
        sample_std: sd,
        n,
    })
}

/// The two-term KS upper bound for one model at one radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsBoundReport {
    pub r: f64,
    /// `2|σ − 1|`.
    pub sigma_term: f64,
    /// `(1 + log⁺ log max_{|u|=r} |E[e^{iuX}]|) / r`.
    pub bracket_term: f64,
    #[serde(rename = "constant_A")]
    pub constant_a: f64,
    pub bound: f64,
    pub empirical_ks: Option<f64>,
    /// `log max_{|u|=r} |E[e^{iuX}]|`.
    pub log_circle_max: f64,
    pub zero_free_radius: f64,
    pub scan_status: ScanStatus,
    /// `σ = 0`: the bound is vacuous (≥ 2).
    pub degenerate: bool,
}

impl KsBoundReport {
    pub fn with_empirical(mut self, ks: f64) -> Self {
        self.empirical_ks = Some(ks);
        self
    }

    /// Same report with a different calibration constant.
    pub fn recalibrated(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.constant_a = a;
        out.bound = out.sigma_term + a * out.bracket_term;
        out
    }

    /// `empirical_ks ≤ bound`, when an empirical value is attached.
    pub fn holds(&self) -> Option<bool> {
        self.empirical_ks.map(|ks| ks <= self.bound)
    }
}

/// `2|σ−1| + A (1 + log⁺ log max_{|u|=r}|E[e^{iuX}]|) / r`.
///
/// The disk of radius `r` is first scanned; `r` beyond the zero-free radius
/// is a precondition error. Degenerate models (`σ = 0`) are not an error:
/// they produce the vacuous bound with `degenerate = true`.
pub fn ks_bound(model: &CharFnModel, r: f64, a: f64, opts: &ScanOptions) -> Result<KsBoundReport> {
    if !(a > 0.0) {
        return Err(Error::Argument(format!("constant A must be positive, got {a}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!("radius must be positive, got {r}")));
    }
    let scan = zero_free_radius(model, r, r / 16.0, opts)?;
    if scan.zero_free_radius < r * (1.0 - 1e-9) {
        return Err(Error::Precondition(format!(
            "r = {r} exceeds the zero-free radius {} of {}",
            scan.zero_free_radius, model.description
        )));
    }
    let cm = circle_max(model, r)?;
    let log_max = cm.max_modulus.ln();
    let sigma_term = 2.0 * (model.std_dev - 1.0).abs();
    let bracket_term = (1.0 + log_plus_of_log(log_max)) / r;
    Ok(KsBoundReport {
        r,
        sigma_term,
        bracket_term,
        constant_a: a,
        bound: sigma_term + a * bracket_term,
        empirical_ks: None,
        log_circle_max: log_max,
        zero_free_radius: scan.zero_free_radius,
        scan_status: scan.status,
        degenerate: model.is_degenerate(),
    })
}

/// `∫_{−T}^{T} |(Ψ(t) − e^{−t²/2}) / t| dt + 1/T` for a centered, unit
/// variance model, without the universal prefactor.
///
/// The integrand is even in `t` and extends continuously to `0` with value
/// `0`, so Gauss–Legendre on `[0, T]` (interior nodes) is used and doubled.
pub fn smoothing_ks_bound(model: &CharFnModel, t_max: f64, quad_points: usize) -> Result<f64> {
    if !(t_max > 0.0) {
        return Err(Error::Argument(format!("T must be positive, got {t_max}")));
    }
    if quad_points == 0 {
        return Err(Error::Argument("need at least one quadrature point".into()));
    }
    if model.mean.abs() > 1e-8 || (model.std_dev - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "smoothing bound needs a centered unit-variance model; {} has mean {} and σ {}",
            model.description, model.mean, model.std_dev
        )));
    }
    if t_max > model.validity_radius {
        return Err(Error::Domain(format!(
            "T = {t_max} exceeds validity radius {}",
            model.validity_radius
        )));
    }
    let rule = gauss_legendre(quad_points).mapped(0.0, t_max);
    let mut integral = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let psi = model.eval_unchecked(Complex64::new(0.0, t))?;
        integral += w * (psi - (-0.5 * t * t).exp()).norm() / t;
    }
    Ok(2.0 * integral + 1.0 / t_max)
}
