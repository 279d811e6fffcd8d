use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha_det::alpha_det_complex;
use super::kernel::{DiscretizedKernel, KernelSpec, TestFunction};
use crate::charfn::CharFnModel;
use crate::error::{Error, Result};
use crate::numeric::linalg::{complex_det, complex_eigenvalues, spectral_norm_complex, sym_eigenvalues};
use crate::numeric::Complex64;

/// Margin below 1 required of the spectral radius of `α·G·M`.
pub const FREDHOLM_TOL: f64 = 1e-9;

/// Largest truncation order of the series check.
pub const MAX_SERIES_ORDER: usize = 6;

fn check_phi(dk: &DiscretizedKernel, phi: &[f64]) -> Result<()> {
    if phi.len() != dk.len() {
        return Err(Error::Argument(format!(
            "test function has {} values for {} grid points",
            phi.len(),
            dk.len()
        )));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("test function values must be finite".into()));
    }
    Ok(())
}

/// `log(1 + z)` accurate for small `|z|`.
fn clog1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
    Complex64::new(re, z.im.atan2(1.0 + z.re))
}

/// `g_i = 1 − e^{−uφ_i}`.
fn laplace_weights(phi: &[f64], u: Complex64) -> Vec<Complex64> {
    phi.iter()
        .map(|&p| {
            if u.im == 0.0 {
                Complex64::new(-(-u.re * p).exp_m1(), 0.0)
            } else {
                Complex64::new(1.0, 0.0) - (-u * p).exp()
            }
        })
        .collect()
}

/// Eigenvalues of `Bᵀ G B`, the nonzero spectrum of `G M`.
fn weighted_spectrum(dk: &DiscretizedKernel, g: &[Complex64], real: bool) -> Vec<Complex64> {
    let b = dk.factor();
    let (m, r) = (b.nrows(), b.ncols());
    if r == 0 {
        return Vec::new();
    }
    if real {
        let mut gb = b.clone();
        for i in 0..m {
            gb.row_mut(i).scale_mut(g[i].re);
        }
        let t = b.transpose() * gb;
        let t = (&t + t.transpose()) * 0.5;
        sym_eigenvalues(&t).into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    } else {
        let bc = b.map(|x| Complex64::new(x, 0.0));
        let gb = DMatrix::from_fn(m, r, |i, c| bc[(i, c)] * g[i]);
        complex_eigenvalues(bc.transpose() * gb)
    }
}

/// Campbell formula `Σ_i M_ii (e^{−uφ_i} − 1)` for the Poisson process.
fn campbell_log_laplace(dk: &DiscretizedKernel, phi: &[f64], u: Complex64) -> Complex64 {
    phi.iter()
        .enumerate()
        .map(|(i, &p)| {
            let e = if u.im == 0.0 {
                Complex64::new((-u.re * p).exp_m1(), 0.0)
            } else {
                (-u * p).exp() - 1.0
            };
            e * dk.matrix[(i, i)]
        })
        .sum()
}

/// `log E[e^{−uΛ(φ)}] = −(1/α) Σ_i log(1 + η_i)` with `η_i` the eigenvalues
/// of `α·diag(1 − e^{−uφ})·M`; the Campbell formula when `α = 0`.
pub fn fredholm_log_laplace(dk: &DiscretizedKernel, phi: &[f64], u: Complex64, alpha: f64) -> Result<Complex64> {
    check_phi(dk, phi)?;
    if !alpha.is_finite() {
        return Err(Error::Argument("α must be finite".into()));
    }
    if alpha == 0.0 {
        return Ok(campbell_log_laplace(dk, phi, u));
    }
    if u == Complex64::new(0.0, 0.0) {
        return Ok(u);
    }
    let g = laplace_weights(phi, u);
    let eta: Vec<Complex64> = weighted_spectrum(dk, &g, u.im == 0.0)
        .into_iter()
        .map(|l| l * alpha)
        .collect();
    let radius = eta.iter().map(|e| e.norm()).fold(0.0, f64::max);
    if radius >= 1.0 - FREDHOLM_TOL {
        return Err(Error::Domain(format!(
            "spectral radius {radius} of α·(1 − e^{{−uφ}})·K at u = {u} is not below 1; the Fredholm formula does not apply"
        )));
    }
    Ok(eta.iter().map(|&e| clog1p(e)).sum::<Complex64>() * (-1.0 / alpha))
}

/// `E[e^{−uΛ(φ)}]`.
pub fn fredholm_laplace(dk: &DiscretizedKernel, phi: &[f64], u: Complex64, alpha: f64) -> Result<Complex64> {
    Ok(fredholm_log_laplace(dk, phi, u, alpha)?.exp())
}

/// `E[Λ(φ)] = Σ_i φ_i M_ii`.
pub fn linstat_mean(dk: &DiscretizedKernel, phi: &[f64]) -> Result<f64> {
    check_phi(dk, phi)?;
    Ok(phi.iter().enumerate().map(|(i, p)| p * dk.matrix[(i, i)]).sum())
}

/// `Var Λ(φ) = Σ_i φ_i² M_ii + α Σ_ij φ_i M_ij² φ_j`, the quadrature of
/// `∫φ²K(x,x)dμ + α∬φ(x)K(x,y)²φ(y)dμdμ`.
pub fn linstat_variance_formula(dk: &DiscretizedKernel, phi: &[f64], alpha: f64) -> Result<f64> {
    let (diag, pair) = variance_terms(dk, phi)?;
    Ok(diag + alpha * pair)
}

/// The two terms of the variance: `(Σ φ_i² M_ii, Σ φ_i M_ij² φ_j)`.
pub fn variance_terms(dk: &DiscretizedKernel, phi: &[f64]) -> Result<(f64, f64)> {
    check_phi(dk, phi)?;
    let m = dk.len();
    let diag = (0..m).map(|i| phi[i] * phi[i] * dk.matrix[(i, i)]).sum();
    let pair = (0..m)
        .into_par_iter()
        .map(|i| {
            if phi[i] == 0.0 {
                return 0.0;
            }
            phi[i] * (0..m).map(|j| dk.matrix[(i, j)].powi(2) * phi[j]).sum::<f64>()
        })
        .sum();
    Ok((diag, pair))
}

/// Outcome of [`fredholm_series_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheck {
    /// `Σ_{n ≤ k_max} (1/n!) Σ_{i_1..i_n} Det_α[J(x_{i_a}, x_{i_b})]`.
    pub series: Complex64,
    /// `Det[I + α G M]^{−1/α}` from the eigenvalues.
    pub eigen: Complex64,
    pub abs_diff: f64,
}

/// Visits every multiset of size `n` from `0..m` as a nondecreasing index
/// list, together with `Π (multiplicity)!`.
fn for_each_multiset(m: usize, n: usize, f: &mut impl FnMut(&[usize], f64)) {
    fn rec(m: usize, n: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize], f64)) {
        if cur.len() == n {
            let mut fact = 1.0;
            let mut run = 1.0;
            for k in 1..cur.len() {
                if cur[k] == cur[k - 1] {
                    run += 1.0;
                    fact *= run;
                } else {
                    run = 1.0;
                }
            }
            f(cur, fact);
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(m, n, i, cur, f);
            cur.pop();
        }
    }
    rec(m, n, 0, &mut Vec::with_capacity(n), f);
}

/// Compares the expansion `Det[I − αJ]^{−1/α} = Σ_n (1/n!) Σ Det_α[J]`
/// with `J = −diag(1 − e^{−uφ})·M`, truncated at `k_max`, against the
/// eigenvalue evaluation. Ordered tuples are summed as multisets weighted by
/// their multinomial counts.
pub fn fredholm_series_check(
    dk: &DiscretizedKernel,
    phi: &[f64],
    u: Complex64,
    alpha: f64,
    k_max: usize,
) -> Result<SeriesCheck> {
    check_phi(dk, phi)?;
    if k_max > MAX_SERIES_ORDER {
        return Err(Error::Argument(format!("series order {k_max} exceeds {MAX_SERIES_ORDER}")));
    }
    let m = dk.len();
    let g = laplace_weights(phi, u);
    let j = DMatrix::from_fn(m, m, |a, b| -g[a] * dk.matrix[(a, b)]);
    let norm = alpha.abs() * spectral_norm_complex(&j);
    if norm >= 1.0 - FREDHOLM_TOL {
        return Err(Error::Domain(format!("‖αJ‖ = {norm} is not below 1; the series need not converge")));
    }
    let eigen = fredholm_laplace(dk, phi, u, alpha)?;
    let mut series = Complex64::new(1.0, 0.0);
    for n in 1..=k_max {
        let mut term = Complex64::new(0.0, 0.0);
        let mut err = None;
        for_each_multiset(m, n, &mut |idx, mult| {
            if err.is_some() {
                return;
            }
            let sub = DMatrix::from_fn(n, n, |a, b| j[(idx[a], idx[b])]);
            match alpha_det_complex(&sub, alpha) {
                Ok(v) => term += v / mult,
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        series += term;
    }
    Ok(SeriesCheck {
        series,
        eigen,
        abs_diff: (series - eigen).norm(),
    })
}

/// The moment generating function `u ↦ E[e^{uΛ(φ)}]` as a characteristic
/// function model. For `α = −1/m` (and `α = 0`) it is entire and evaluated
/// as `det(I + α G M)^m` by LU; otherwise through the eigenvalues, inside
/// the disk where the spectral radius stays below 1.
pub fn fredholm_charfn_model(dk: &DiscretizedKernel, phi: &[f64], alpha: f64) -> Result<CharFnModel> {
    check_phi(dk, phi)?;
    let mean = linstat_mean(dk, phi)?;
    let var = linstat_variance_formula(dk, phi, alpha)?;
    let sd = var.max(0.0).sqrt();
    let phi_max = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let desc = format!("Λ(φ) for an α = {alpha} process on {} points", dk.len());
    let phi = phi.to_vec();
    if alpha == 0.0 {
        let diag: Vec<f64> = (0..dk.len()).map(|i| dk.matrix[(i, i)]).collect();
        let f = move |u: Complex64| -> Result<Complex64> {
            Ok(phi
                .iter()
                .zip(&diag)
                .map(|(&p, &k)| ((u * p).exp() - 1.0) * k)
                .sum::<Complex64>()
                .exp())
        };
        return Ok(CharFnModel::from_fn(f, f64::INFINITY, mean, sd, &desc));
    }
    let inv = -1.0 / alpha;
    let power = inv.round();
    if alpha < 0.0 && (inv - power).abs() < 1e-12 {
        let matrix = dk.matrix.clone();
        let power = power as i32;
        let f = move |u: Complex64| -> Result<Complex64> {
            let m = matrix.nrows();
            let g: Vec<Complex64> = phi.iter().map(|&p| 1.0 - (u * p).exp()).collect();
            let a = DMatrix::from_fn(m, m, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                Complex64::new(id, 0.0) + g[i] * matrix[(i, j)] * alpha
            });
            Ok(complex_det(a).powi(power))
        };
        return Ok(CharFnModel::from_fn(f, f64::INFINITY, mean, sd, &desc));
    }
    let lmax = dk.operator_norm();
    let radius = if phi_max == 0.0 || lmax == 0.0 {
        f64::INFINITY
    } else {
        (1.0 + (1.0 - FREDHOLM_TOL) / (alpha.abs() * lmax)).ln() / phi_max * (1.0 - 1e-9)
    };
    let dk = dk.clone();
    let f = move |u: Complex64| -> Result<Complex64> { Ok(fredholm_log_laplace(&dk, &phi, -u, alpha)?.exp()) };
    Ok(CharFnModel::from_fn(f, radius, mean, sd, &desc))
}

/// Cumulants of a linear statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantReport {
    /// Dilation `L` of the test function, when known.
    pub scale: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    /// Finest stencil step actually used.
    pub step: f64,
    /// `κ₃/σ³` (0 when the variance vanishes).
    pub skewness: f64,
    /// `κ₄/σ⁴` (0 when the variance vanishes).
    pub excess_kurtosis: f64,
    /// Largest gap between the two difference levels, in units of `σ^j`.
    pub richardson_gap: f64,
}

/// Gap between Richardson levels (in standardized units) that triggers a
/// step halving.
pub const RICHARDSON_TOL: f64 = 1e-4;
const MAX_HALVINGS: usize = 6;

/// Central differences of orders 1–4 at step `h` from `f(kh)`, `k = −2..=2`.
fn central_differences(f: [f64; 5], h: f64) -> [f64; 4] {
    let [m2, m1, z, p1, p2] = f;
    [
        (p1 - m1) / (2.0 * h),
        (p1 - 2.0 * z + m1) / (h * h),
        (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h.powi(3)),
        (p2 - 4.0 * p1 + 6.0 * z - 4.0 * m1 + m2) / h.powi(4),
    ]
}

/// Cumulants of `Λ(φ)` from central differences of `u ↦ log E[e^{−uΛ}]` at
/// 0 with steps `s` and `2s` (stencil up to `|u| = 4s`) combined by one
/// Richardson extrapolation, so that `κ_j = (−1)^j f^{(j)}(0)`. The default
/// step is `10⁻²/σ` with `σ` from the variance formula; it is halved while
/// the two levels disagree by more than [`RICHARDSON_TOL`] in units of
/// `σ^j`.
/// When `α = 0` the cumulants are the exact sums `κ_j = Σ_i φ_i^j K_ii`.
pub fn linstat_cumulants(dk: &DiscretizedKernel, phi: &[f64], alpha: f64, step: Option<f64>) -> Result<CumulantReport> {
    check_phi(dk, phi)?;
    let var_formula = linstat_variance_formula(dk, phi, alpha)?;
    let sigma_est = if var_formula > 1e-12 { var_formula.sqrt() } else { 1.0 };
    let mut s = match step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::Argument(format!("step must be positive, got {s}"))),
        None => 1e-2 / sigma_est,
    };
    if alpha == 0.0 {
        // Poisson: κ_j = Σ φ_i^j K_ii exactly
        let mut kappa = [0.0; 4];
        for (i, &p) in phi.iter().enumerate() {
            let k = dk.matrix[(i, i)];
            for (j, c) in kappa.iter_mut().enumerate() {
                *c += p.powi(j as i32 + 1) * k;
            }
        }
        let sd = kappa[1].max(0.0).sqrt();
        let (skew, kurt) = if sd > 1e-12 * (1.0 + kappa[0].abs()) {
            (kappa[2] / sd.powi(3), kappa[3] / sd.powi(4))
        } else {
            (0.0, 0.0)
        };
        return Ok(CumulantReport {
            scale: None,
            mean: kappa[0],
            variance: kappa[1],
            kappa3: kappa[2],
            kappa4: kappa[3],
            step: s,
            skewness: skew,
            excess_kurtosis: kurt,
            richardson_gap: 0.0,
        });
    }
    let mut last_gap = f64::NAN;
    for _ in 0..=MAX_HALVINGS {
        let ks: [i32; 6] = [-4, -2, -1, 1, 2, 4];
        let vals: Vec<f64> = ks
            .par_iter()
            .map(|&k| fredholm_log_laplace(dk, phi, Complex64::new(k as f64 * s, 0.0), alpha).map(|v| v.re))
            .collect::<Result<_>>()?;
        let at = |k: i32| -> f64 { vals[ks.iter().position(|&x| x == k).unwrap()] };
        let level = |m: i32| central_differences([at(-2 * m), at(-m), 0.0, at(m), at(2 * m)], m as f64 * s);
        let (coarse, fine) = (level(2), level(1));
        let mut est = [0.0; 4];
        let mut gap: f64 = 0.0;
        for j in 0..4 {
            est[j] = (4.0 * fine[j] - coarse[j]) / 3.0;
            gap = gap.max((fine[j] - coarse[j]).abs() / 3.0 / sigma_est.powi(j as i32 + 1));
        }
        last_gap = gap;
        if gap <= RICHARDSON_TOL {
            let kappa = [-est[0], est[1], -est[2], est[3]];
            let sd = kappa[1].max(0.0).sqrt();
            let (skew, kurt) = if sd > 1e-12 * (1.0 + kappa[0].abs()) {
                (kappa[2] / sd.powi(3), kappa[3] / sd.powi(4))
            } else {
                (0.0, 0.0)
            };
            return Ok(CumulantReport {
                scale: None,
                mean: kappa[0],
                variance: kappa[1],
                kappa3: kappa[2],
                kappa4: kappa[3],
                step: s,
                skewness: skew,
                excess_kurtosis: kurt,
                richardson_gap: gap,
            });
        }
        s /= 2.0;
    }
    Err(Error::numerical(
        "cumulant finite differences (Richardson levels disagree)",
        last_gap,
    ))
}

/// `log E[e^{rN_L}] / L^d` for the point count `N_L` of the box
/// `[−L/2, L/2]^d`, one row `(L, log E[e^{rN_L}], ratio)` per side.
pub fn mgf_growth(spec: &KernelSpec, sides: &[f64], r: f64, resolution: f64) -> Result<Vec<(f64, f64, f64)>> {
    sides
        .iter()
        .map(|&l| {
            let dk = DiscretizedKernel::for_statistic(spec, &TestFunction::Indicator, l / 2.0, resolution)?;
            let phi = vec![1.0; dk.len()];
            let v = fredholm_log_laplace(&dk, &phi, Complex64::new(-r, 0.0), spec.alpha)?.re;
            Ok((l, v, v / l.powi(spec.dim as i32)))
        })
        .collect()
}
