use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::numeric::quadrature::gauss_legendre;
use crate::numeric::rng::stream_rng;
use crate::numeric::stats::{log_log_fit, LinearFit};

/// Constants of the polynomial decay condition: for every centre `x` the
/// set `E_x = {y : |K(x,y)| ≥ c₁‖x−y‖^{−β}}` must fill at least a fraction
/// `c₂` of each annulus `A_n^x(r) = {nr ≤ ‖x−y‖ ≤ (n+1)r}`, `n₀ ≤ n ≤ n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayParams {
    pub decay_beta: f64,
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    pub n0: usize,
    pub n_max: usize,
    /// Random centres, drawn uniformly from `[−extent, extent]^d`.
    pub centers: usize,
    pub extent: f64,
    /// Monte Carlo points per annulus and centre.
    pub samples_per_annulus: usize,
    /// Random directions for the tail integral of `K²`.
    pub directions: usize,
    /// Optional near-diagonal condition `|K(x,y)| ≥ a` for `‖x−y‖ < δ`,
    /// given as `(a, δ)`.
    pub near_diagonal: Option<(f64, f64)>,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams {
            decay_beta: 1.5,
            r: 2.0 * PI,
            c1: 1.0,
            c2: 0.1,
            n0: 1,
            n_max: 40,
            centers: 8,
            extent: 10.0,
            samples_per_annulus: 2000,
            directions: 32,
            near_diagonal: None,
        }
    }
}

impl DecayParams {
    /// The constants for the unit-ball Fourier kernel `(2π)^{d/2} r^{−d/2}
    /// J_{d/2}(r)` in dimension `d ≥ 2`: `β = (d+1)/2`, `r = 2π`,
    /// `c₁ = (2π)^{d/2}/(4√π)` and `c₂ = (b−a)/(2^d π)` where `[a, b]` is the
    /// arc of `[0, 2π]` on which `cos(t − (d+1)π/4) ≥ 1/2`.
    pub fn ball_fourier(dim: usize) -> Self {
        let d = dim as f64;
        let phase = (d + 1.0) * PI / 4.0;
        // cos(t − phase) ≥ 1/2 on t − phase ∈ [−π/3, π/3], shifted into [0, 2π]
        let a = (phase - PI / 3.0).rem_euclid(2.0 * PI);
        let b = (a + 2.0 * PI / 3.0).min(2.0 * PI);
        DecayParams {
            decay_beta: (d + 1.0) / 2.0,
            r: 2.0 * PI,
            c1: (2.0 * PI).powf(d / 2.0) / (4.0 * PI.sqrt()),
            c2: (b - a) / (2f64.powi(dim as i32) * PI),
            ..DecayParams::default()
        }
    }
}

/// Estimated coverage of one annulus (minimum over centres).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRow {
    pub n: usize,
    pub fraction: f64,
    pub std_error: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub params: DecayParams,
    /// `d/2 < β < d`.
    pub beta_in_range: bool,
    pub annuli: Vec<AnnulusRow>,
    /// Every annulus in `[n₀, n_max]` is covered to at least `c₂`.
    pub annuli_pass: bool,
    /// `(R, ∫_{R<‖x−y‖<R_max} K(x,y)² dy)`, minimum over centres.
    pub tail: Vec<(f64, f64)>,
    /// `min_R T(R)/R^{d−2β}` over the tabulated radii.
    pub c3_fitted: f64,
    /// `c₁²c₂2^{−2β}∫_{‖y‖≥2}‖y‖^{−2β}dy`, the constant the decay condition
    /// implies for the tail bound.
    pub c3_implied: f64,
    /// Slope of `log T(R)` against `log R`, to compare with `d − 2β`.
    pub tail_fit: Option<LinearFit>,
    pub tail_bound_holds: bool,
    /// Polynomial decay condition: β in range, every annulus covered and
    /// the tail integral bounded below.
    pub decay_condition: bool,
    /// Near-diagonal condition, when requested.
    pub near_diagonal_condition: Option<bool>,
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn sphere_area(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// Monte Carlo audit of the polynomial decay condition on annuli, of the
/// lower bound `∫_{‖x−y‖>R} K² ≥ c₃R^{d−2β}` that follows from it, and of the
/// optional near-diagonal lower bound.
pub fn kernel_decay_check(spec: &KernelSpec, params: &DecayParams, seed: u64) -> Result<DecayReport> {
    spec.validate()?;
    let p = params;
    if !(p.r > 0.0 && p.c1 > 0.0 && p.c2 > 0.0 && p.decay_beta > 0.0) {
        return Err(Error::Argument("r, c1, c2 and decay_beta must be positive".into()));
    }
    if p.n0 == 0 || p.n0 > p.n_max || p.centers == 0 || p.samples_per_annulus == 0 || p.directions == 0 {
        return Err(Error::Argument("need 1 ≤ n0 ≤ n_max and positive sample counts".into()));
    }
    let d = spec.dim;
    let df = d as f64;
    let beta = p.decay_beta;
    let mut rng = stream_rng(seed, 0);
    let centers: Vec<Vec<f64>> = (0..p.centers)
        .map(|_| (0..d).map(|_| rng.random_range(-p.extent..=p.extent)).collect())
        .collect();

    let annuli: Vec<AnnulusRow> = (p.n0..=p.n_max)
        .into_par_iter()
        .map(|n| {
            let mut rng = stream_rng(seed, 1 + n as u64);
            let (lo, hi) = (n as f64 * p.r, (n + 1) as f64 * p.r);
            let mut worst = (f64::INFINITY, 0.0);
            for x in &centers {
                let mut hits = 0usize;
                for _ in 0..p.samples_per_annulus {
                    let dir = unit_vector(d, &mut rng);
                    let u: f64 = rng.random();
                    let rho = (lo.powf(df) + u * (hi.powf(df) - lo.powf(df))).powf(1.0 / df);
                    let y: Vec<f64> = x.iter().zip(&dir).map(|(a, e)| a + rho * e).collect();
                    if spec.eval(x, &y).abs() >= p.c1 * rho.powf(-beta) {
                        hits += 1;
                    }
                }
                let f = hits as f64 / p.samples_per_annulus as f64;
                if f < worst.0 {
                    worst = (f, (f * (1.0 - f) / p.samples_per_annulus as f64).sqrt());
                }
            }
            AnnulusRow {
                n,
                fraction: worst.0,
                std_error: worst.1,
                passes: worst.0 >= p.c2,
            }
        })
        .collect();
    let annuli_pass = annuli.iter().all(|a| a.passes);

    // tail integrals on Gauss–Legendre panels of width r/4 out to (n_max+1)r
    let r_max = (p.n_max + 1) as f64 * p.r;
    let panel = p.r / 4.0;
    let panels = (r_max / panel).round() as usize;
    let rule = gauss_legendre(8);
    let radii: Vec<usize> = (p.n0..=(p.n_max + 1) / 4).map(|n| (n as f64 * p.r / panel).round() as usize).collect();
    let area = sphere_area(d);
    let per_center: Vec<Vec<f64>> = centers
        .par_iter()
        .enumerate()
        .map(|(c, x)| {
            let mut rng = stream_rng(seed, 1_000_000 + c as u64);
            let dirs: Vec<Vec<f64>> = (0..p.directions).map(|_| unit_vector(d, &mut rng)).collect();
            // integral over each panel, averaged over directions
            let mut panel_int = vec![0.0; panels];
            for (k, slot) in panel_int.iter_mut().enumerate() {
                let q = rule.mapped(k as f64 * panel, (k + 1) as f64 * panel);
                let mut s = 0.0;
                for dir in &dirs {
                    s += q.integrate(|rho| {
                        let y: Vec<f64> = x.iter().zip(dir).map(|(a, e)| a + rho * e).collect();
                        spec.eval(x, &y).powi(2) * rho.powf(df - 1.0)
                    });
                }
                *slot = area * s / dirs.len() as f64;
            }
            let mut suffix = vec![0.0; panels + 1];
            for k in (0..panels).rev() {
                suffix[k] = suffix[k + 1] + panel_int[k];
            }
            radii.iter().map(|&k| suffix[k.min(panels)]).collect()
        })
        .collect();
    let tail: Vec<(f64, f64)> = radii
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let t = per_center.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
            (k as f64 * panel, t)
        })
        .collect();
    let c3_fitted = tail
        .iter()
        .map(|&(r, t)| t / r.powf(df - 2.0 * beta))
        .fold(f64::INFINITY, f64::min);
    let c3_implied = if 2.0 * beta > df {
        p.c1 * p.c1 * p.c2 * 2f64.powf(-2.0 * beta) * area * 2f64.powf(df - 2.0 * beta) / (2.0 * beta - df)
    } else {
        f64::INFINITY
    };
    let tail_fit = if tail.len() >= 2 && tail.iter().all(|t| t.1 > 0.0) {
        let (rs, ts): (Vec<f64>, Vec<f64>) = tail.iter().copied().unzip();
        log_log_fit(&rs, &ts).ok()
    } else {
        None
    };
    let tail_bound_holds = c3_fitted.is_finite() && c3_fitted >= c3_implied;
    let beta_in_range = df / 2.0 < beta && beta < df;

    let near_diagonal_condition = p.near_diagonal.map(|(a, delta)| {
        let mut rng = stream_rng(seed, 2_000_000);
        centers.iter().all(|x| {
            (0..p.samples_per_annulus).all(|_| {
                let dir = unit_vector(d, &mut rng);
                let rho = delta * rng.random::<f64>().powf(1.0 / df);
                let y: Vec<f64> = x.iter().zip(&dir).map(|(c, e)| c + rho * e).collect();
                spec.eval(x, &y).abs() >= a
            })
        })
    });

    Ok(DecayReport {
        params: p.clone(),
        beta_in_range,
        decay_condition: beta_in_range && annuli_pass && tail_bound_holds,
        annuli,
        annuli_pass,
        tail,
        c3_fitted,
        c3_implied,
        tail_fit,
        tail_bound_holds,
        near_diagonal_condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::kernel::{CustomKernel, Density, KernelFamily};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn quick(mut p: DecayParams) -> DecayParams {
        p.centers = 3;
        p.samples_per_annulus = 400;
        p.directions = 8;
        p.n_max = 12;
        p
    }

    #[test]
    fn ball_fourier_constants() {
        let p = DecayParams::ball_fourier(2);
        assert_abs_diff_eq!(p.decay_beta, 1.5);
        assert_abs_diff_eq!(p.c1, PI.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.c2, 1.0 / 6.0, epsilon = 1e-15);
        let p3 = DecayParams::ball_fourier(3);
        assert_abs_diff_eq!(p3.c2, (2.0 * PI / 3.0) / (8.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn ball_fourier_passes_gaussian_fails() {
        let p = quick(DecayParams::ball_fourier(2));
        let bf = KernelSpec::ball_fourier_scaled(2, 1.0, -1.0).unwrap();
        let rep = kernel_decay_check(&bf, &p, 1).unwrap();
        assert!(rep.decay_condition, "{rep:?}");
        let slope = rep.tail_fit.unwrap().slope;
        assert!((slope + 1.0).abs() < 0.3, "{slope}");
        let g = KernelSpec::gaussian(2, 1.0, 1.0, -1.0).unwrap();
        for beta in [1.1, 1.5, 1.9] {
            let rep = kernel_decay_check(&g, &DecayParams { decay_beta: beta, ..p.clone() }, 1).unwrap();
            assert!(!rep.annuli_pass && !rep.decay_condition);
        }
    }

    #[test]
    fn near_diagonal_plateau() {
        let flat = KernelSpec::new(
            2,
            KernelFamily::Custom(CustomKernel(Arc::new(|x: &[f64], y: &[f64]| {
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                if r < 0.5 {
                    0.3
                } else {
                    0.0
                }
            }))),
            Density::Constant { value: 1.0 },
            -1.0,
        )
        .unwrap();
        let p = DecayParams {
            near_diagonal: Some((0.3, 0.5)),
            ..quick(DecayParams::default())
        };
        assert_eq!(kernel_decay_check(&flat, &p, 2).unwrap().near_diagonal_condition, Some(true));
        let p = DecayParams {
            near_diagonal: Some((0.3, 0.8)),
            ..p
        };
        assert_eq!(kernel_decay_check(&flat, &p, 2).unwrap().near_diagonal_condition, Some(false));
    }
}
