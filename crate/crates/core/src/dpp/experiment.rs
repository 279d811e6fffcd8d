use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fredholm::{fredholm_charfn_model, linstat_cumulants, linstat_mean, linstat_variance_formula};
use super::kernel::{window_grid, DiscretizedKernel, KernelSpec, TestFunction};
use super::sample::{sample_dpp_many, sample_permanental_cox, sample_poisson};
use crate::charfn::{empirical_ks, zero_free_radius, ScanOptions, ScanStatus};
use crate::error::{Error, Result};
use crate::numeric::stats::{log_log_fit, mean, variance, LinearFit};

/// Largest relative change of the variance between resolutions `h` and
/// `2h` accepted by [`variance_scaling_fit`].
pub const RESOLUTION_TOL: f64 = 0.02;

/// Default cell side for a kernel: a quarter of its correlation length.
pub fn default_resolution(spec: &KernelSpec) -> f64 {
    spec.correlation_length() / 4.0
}

/// Variance growth exponent `2η` of `Λ(φ_L)` predicted for the kernel class,
/// with the name of the class.
pub fn predicted_variance_exponent(spec: &KernelSpec) -> (Option<f64>, &'static str) {
    let d = spec.dim as f64;
    if spec.alpha > 0.0 {
        (Some(d), "alpha > 0: d")
    } else if spec.alpha == 0.0 {
        (Some(d), "Poisson: d")
    } else if let Some(beta) = spec.decay_beta {
        (Some(2.0 * (d - beta)), "alpha < 0, polynomial decay: 2(d - beta)")
    } else {
        (Some(d - 4.0), "alpha < 0, near-diagonal bound: d - 4")
    }
}

/// `Var Λ(φ_L)` on the midpoint grid of side `h` without forming the dense
/// matrix. Translation-invariant kernels use a table of `K²` over index
/// offsets. Returns the variance and the number of points.
pub fn grid_variance(spec: &KernelSpec, phi: &TestFunction, scale: f64, h: f64) -> Result<(f64, usize)> {
    let grid = window_grid(spec, phi, scale, h)?;
    let d = spec.dim;
    let vol = grid.cell_volume();
    let mut idx = Vec::new();
    let mut pts = Vec::new();
    let mut a = Vec::new();
    let mut diag = 0.0;
    for i in 0..grid.len() {
        let x = grid.point(i);
        let p = phi.eval_scaled(&x, scale);
        if p == 0.0 {
            continue;
        }
        let w = spec.density.eval(&x) * vol;
        diag += p * p * w * spec.eval(&x, &x);
        idx.push(grid.index(i));
        pts.push(x);
        a.push(p * w);
    }
    let m = a.len();
    let pair: f64 = match spec.difference_profile() {
        Some(profile) => {
            let span: Vec<usize> = grid.cells.iter().map(|&c| 2 * c - 1).collect();
            let total: usize = span.iter().product();
            let table: Vec<f64> = (0..total)
                .into_par_iter()
                .map(|mut t| {
                    let z: Vec<f64> = (0..d)
                        .map(|ax| {
                            let o = (t % span[ax]) as f64 - (grid.cells[ax] - 1) as f64;
                            t /= span[ax];
                            o * grid.spacing(ax)
                        })
                        .collect();
                    profile(&z).powi(2)
                })
                .collect();
            let offset = |i: usize, j: usize| -> usize {
                let mut k = 0;
                let mut stride = 1;
                for ax in 0..d {
                    k += (idx[i][ax] + grid.cells[ax] - 1 - idx[j][ax]) * stride;
                    stride *= span[ax];
                }
                k
            };
            (0..m)
                .into_par_iter()
                .map(|i| a[i] * (0..m).map(|j| a[j] * table[offset(i, j)]).sum::<f64>())
                .sum()
        }
        None => (0..m)
            .into_par_iter()
            .map(|i| a[i] * (0..m).map(|j| a[j] * spec.eval(&pts[i], &pts[j]).powi(2)).sum::<f64>())
            .sum(),
    };
    Ok((diag + spec.alpha * pair, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub scale: f64,
    pub points: usize,
    pub variance: f64,
    /// Variance on the grid of twice the cell side.
    pub coarse_variance: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScalingFit {
    pub rows: Vec<VarianceRow>,
    pub resolution: f64,
    /// Slope of `log Var` against `log L`.
    pub exponent: f64,
    pub r_squared: f64,
    pub exponent_stderr: f64,
    pub predicted: Option<f64>,
    pub regime: String,
}

impl VarianceScalingFit {
    /// `|exponent − predicted|`.
    pub fn deviation(&self) -> Option<f64> {
        self.predicted.map(|p| (self.exponent - p).abs())
    }
}

/// Variance at scale `L` on grids of cell side `h` and `2h`; a relative
/// change above [`RESOLUTION_TOL`] is a numerical error.
pub fn variance_row(spec: &KernelSpec, phi: &TestFunction, scale: f64, h: f64) -> Result<VarianceRow> {
    let (v, m) = grid_variance(spec, phi, scale, h)?;
    let (vc, _) = grid_variance(spec, phi, scale, 2.0 * h)?;
    let change = ((v - vc) / v).abs();
    if !(change < RESOLUTION_TOL) {
        return Err(Error::numerical(
            format!("variance resolution check at L = {scale}, h = {h} (relative change between h and 2h)"),
            change,
        ));
    }
    Ok(VarianceRow {
        scale,
        points: m,
        variance: v,
        coarse_variance: vc,
        relative_change: change,
    })
}

/// Fits `log Var Λ(φ_L)` against `log L` from the variance formula on grids
/// of cell side `resolution` (default: a quarter correlation length). Every
/// scale is also evaluated at twice the cell side; a relative change above
/// [`RESOLUTION_TOL`] is a numerical error.
pub fn variance_scaling_fit(
    spec: &KernelSpec,
    phi: &TestFunction,
    scales: &[f64],
    resolution: Option<f64>,
) -> Result<VarianceScalingFit> {
    spec.validate()?;
    if scales.len() < 3 {
        return Err(Error::Argument("the variance fit needs at least three scales".into()));
    }
    let h = resolution.unwrap_or_else(|| default_resolution(spec));
    let rows = scales
        .iter()
        .map(|&l| variance_row(spec, phi, l, h))
        .collect::<Result<Vec<_>>>()?;
    let fit = log_log_fit(scales, &rows.iter().map(|r| r.variance).collect::<Vec<_>>())?;
    let (predicted, regime) = predicted_variance_exponent(spec);
    Ok(VarianceScalingFit {
        rows,
        resolution: h,
        exponent: fit.slope,
        r_squared: fit.r_squared,
        exponent_stderr: fit.slope_stderr,
        predicted,
        regime: regime.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DppBackend {
    /// Cumulants from the Fredholm determinant.
    Cumulant,
    /// Monte Carlo samples of the process.
    Sampling,
}

/// Settings of [`dpp_clt_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DppCltConfig {
    pub scales: Vec<f64>,
    pub backend: DppBackend,
    pub seed: u64,
    /// Cell side; defaults to a quarter correlation length.
    pub resolution: Option<f64>,
    /// Samples per scale for the sampling backend.
    pub samples: usize,
    /// Scan the zero-free radius of `u ↦ E[e^{iuΛ}]`.
    pub scan: bool,
    /// Largest radius scanned (capped by the model's validity radius).
    pub scan_radius: f64,
    pub scan_step: f64,
    /// Relative width at which the radius bisection stops.
    pub scan_rel_tol: f64,
}

impl Default for DppCltConfig {
    fn default() -> Self {
        DppCltConfig {
            scales: vec![8.0, 16.0, 32.0, 64.0],
            backend: DppBackend::Cumulant,
            seed: 0,
            resolution: None,
            samples: 20_000,
            scan: true,
            scan_radius: 8.0,
            scan_step: 0.5,
            scan_rel_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppCltRow {
    pub scale: f64,
    pub points: usize,
    pub mean: f64,
    pub variance: f64,
    /// `κ₃/σ³`, from cumulants or from samples.
    pub skewness: f64,
    /// `κ₄/σ⁴`, from cumulants or from samples.
    pub excess_kurtosis: f64,
    /// Studentized KS distance to `Φ` (sampling backend).
    pub ks: Option<f64>,
    pub zero_free_radius: Option<f64>,
    pub scan_status: Option<ScanStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppCltResult {
    pub rows: Vec<DppCltRow>,
    /// `log |κ₃/σ³|` against `log L`.
    pub skewness_fit: Option<LinearFit>,
    pub kurtosis_fit: Option<LinearFit>,
    pub ks_fit: Option<LinearFit>,
    pub skewness_decreasing: bool,
    /// `(max − min)/min` of the zero-free radii.
    pub zero_free_spread: Option<f64>,
}

fn abs_fit(scales: &[f64], values: &[f64]) -> Option<LinearFit> {
    let ys: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    log_log_fit(scales, &ys).ok()
}

/// Standardized cumulants (or sampled KS distances) of `Λ(φ_L)` across
/// scales, with the zero-free radius of its characteristic function.
pub fn dpp_clt_experiment(spec: &KernelSpec, phi: &TestFunction, config: &DppCltConfig) -> Result<DppCltResult> {
    spec.validate()?;
    if config.scales.is_empty() {
        return Err(Error::Argument("scales must be nonempty".into()));
    }
    let rows = config
        .scales
        .iter()
        .enumerate()
        .map(|(k, &l)| dpp_clt_row(spec, phi, config, k, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_dpp_rows(rows))
}

/// One scale of [`dpp_clt_experiment`]; the sampling backend seeds scale
/// `index` with [`crate::spin::size_seed`]`(seed, index)`.
pub fn dpp_clt_row(spec: &KernelSpec, phi: &TestFunction, config: &DppCltConfig, index: usize, l: f64) -> Result<DppCltRow> {
    spec.validate()?;
    if !(l > 0.0) {
        return Err(Error::Argument(format!("scale must be positive, got {l}")));
    }
    let h = config.resolution.unwrap_or_else(|| default_resolution(spec));
    let alpha = spec.alpha;
    if config.backend == DppBackend::Sampling && !(alpha == -1.0 || alpha == 0.0 || alpha == 2.0) {
        return Err(Error::Capability(format!(
            "no validated sampler for α = {alpha}; use the cumulant backend"
        )));
    }
    let dk = DiscretizedKernel::for_statistic(spec, phi, l, h)?;
    let values = dk.sample_function(phi, l);
    let mut row = DppCltRow {
        scale: l,
        points: dk.len(),
        mean: linstat_mean(&dk, &values)?,
        variance: linstat_variance_formula(&dk, &values, alpha)?,
        skewness: 0.0,
        excess_kurtosis: 0.0,
        ks: None,
        zero_free_radius: None,
        scan_status: None,
    };
    match config.backend {
        DppBackend::Cumulant => {
            let mut c = linstat_cumulants(&dk, &values, alpha, None)?;
            c.scale = Some(l);
            row.mean = c.mean;
            row.variance = c.variance;
            row.skewness = c.skewness;
            row.excess_kurtosis = c.excess_kurtosis;
        }
        DppBackend::Sampling => {
            let seed = crate::spin::size_seed(config.seed, index);
            let configs = match alpha {
                a if a == -1.0 => sample_dpp_many(&dk, config.samples, seed)?,
                a if a == 2.0 => sample_permanental_cox(&dk, 2.0, config.samples, seed)?,
                _ => sample_poisson(&dk, config.samples, seed),
            };
            let stats: Vec<f64> = configs.iter().map(|c| c.iter().map(|&i| values[i]).sum()).collect();
            let (mu, var) = (mean(&stats), variance(&stats));
            let sd = var.sqrt();
            let central = |p: i32| stats.iter().map(|x| (x - mu).powi(p)).sum::<f64>() / stats.len() as f64;
            if sd > 0.0 {
                row.skewness = central(3) / sd.powi(3);
                row.excess_kurtosis = central(4) / var.powi(2) - 3.0;
            }
            row.mean = mu;
            row.variance = var;
            let ks = empirical_ks(&stats)?;
            row.ks = Some(ks.studentized.unwrap_or(ks.centered));
        }
    }
    if config.scan {
        // centring removes the phase e^{uμ} without moving any zero
        let model = fredholm_charfn_model(&dk, &values, alpha)?.centered();
        let r_max = config.scan_radius.min(model.validity_radius);
        let opts = ScanOptions {
            bisect_rel_tol: config.scan_rel_tol,
            ..ScanOptions::default()
        };
        let scan = zero_free_radius(&model, r_max, config.scan_step.min(r_max), &opts)?;
        row.zero_free_radius = Some(scan.zero_free_radius);
        row.scan_status = Some(scan.status);
    }
    Ok(row)
}

/// Fits and monotonicity summaries over the rows of [`dpp_clt_experiment`].
pub fn summarize_dpp_rows(rows: Vec<DppCltRow>) -> DppCltResult {
    let scales: Vec<f64> = rows.iter().map(|r| r.scale).collect();
    let skews: Vec<f64> = rows.iter().map(|r| r.skewness).collect();
    let kurts: Vec<f64> = rows.iter().map(|r| r.excess_kurtosis).collect();
    let ks: Option<Vec<f64>> = rows.iter().map(|r| r.ks).collect();
    let radii: Option<Vec<f64>> = rows.iter().map(|r| r.zero_free_radius).collect();
    DppCltResult {
        skewness_fit: abs_fit(&scales, &skews),
        kurtosis_fit: abs_fit(&scales, &kurts),
        ks_fit: ks.and_then(|v| log_log_fit(&scales, &v).ok()),
        skewness_decreasing: skews.windows(2).all(|w| w[1].abs() < w[0].abs()),
        zero_free_spread: radii.filter(|r| !r.is_empty()).map(|r| {
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(0.0, f64::max);
            (hi - lo) / lo
        }),
        rows,
    }
}
