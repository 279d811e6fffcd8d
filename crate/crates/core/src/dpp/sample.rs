use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{DiscretizedKernel, SPECTRAL_TOL};
use crate::error::{Error, Result};
use crate::numeric::linalg::sym_eigen;
use crate::numeric::rng::stream_rng;

/// A point configuration on a grid: the cell index of every point (cells
/// repeat when several points share one).
pub type Configuration = Vec<usize>;

/// Fewest samples for which [`correlation_validation`] is considered
/// reliable.
pub const MIN_VALIDATION_SAMPLES: usize = 10_000;

fn check_projection_spectrum(dk: &DiscretizedKernel) -> Result<()> {
    let ev = dk.eigenvalues();
    if let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) {
        if lo < -SPECTRAL_TOL || hi > 1.0 + SPECTRAL_TOL {
            return Err(Error::Domain(format!(
                "determinantal sampling needs eigenvalues in [0, 1], got [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// One draw of the discrete determinantal process with marginal kernel `M`:
/// keep eigenvector `k` with probability `λ_k`, then pick points one at a
/// time from the projection onto the kept span, conditioning after each.
fn draw_dpp(values: &[f64], vectors: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Configuration {
    let m = vectors.nrows();
    let kept: Vec<usize> = (0..values.len())
        .filter(|&k| rng.random::<f64>() < values[k].clamp(0.0, 1.0))
        .collect();
    let mut basis: Vec<DVector<f64>> = kept.iter().map(|&k| vectors.column(k).into_owned()).collect();
    let mut points = Vec::with_capacity(basis.len());
    while !basis.is_empty() {
        let weights: Vec<f64> = (0..m).map(|i| basis.iter().map(|v| v[i] * v[i]).sum()).collect();
        let total: f64 = weights.iter().sum();
        let mut t = rng.random::<f64>() * total;
        let mut pick = m - 1;
        for (i, w) in weights.iter().enumerate() {
            if t < *w {
                pick = i;
                break;
            }
            t -= w;
        }
        points.push(pick);
        // remove the component along e_pick and drop one dimension
        let pivot = (0..basis.len())
            .max_by(|&a, &b| basis[a][pick].abs().total_cmp(&basis[b][pick].abs()))
            .unwrap();
        let pv = basis.swap_remove(pivot);
        for v in basis.iter_mut() {
            let c = v[pick] / pv[pick];
            v.axpy(-c, &pv, 1.0);
            v[pick] = 0.0;
        }
        // re-orthonormalize (modified Gram–Schmidt)
        let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
        for mut v in basis.drain(..) {
            for q in &ortho {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
            let n = v.norm();
            if n > 1e-12 {
                ortho.push(v / n);
            }
        }
        basis = ortho;
    }
    points.sort_unstable();
    points
}

/// One configuration of the determinantal (`α = −1`) process with marginal
/// kernel `M` on the grid points of `dk`.
pub fn sample_dpp(dk: &DiscretizedKernel, seed: u64) -> Result<Configuration> {
    Ok(sample_dpp_many(dk, 1, seed)?.pop().unwrap_or_default())
}

/// `n` independent configurations; sample `i` uses stream `i` of `seed`.
pub fn sample_dpp_many(dk: &DiscretizedKernel, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    check_projection_spectrum(dk)?;
    let (values, vectors) = dk.eigen();
    Ok((0..n)
        .into_par_iter()
        .map(|i| draw_dpp(values, vectors, &mut stream_rng(seed, i as u64)))
        .collect())
}

/// Configurations of the `α = 2` permanental process as a Cox process: a
/// centred Gaussian field `G` with covariance `K` is drawn on the grid and
/// each cell receives `Poisson(G(x_i)² w_i)` points, so that
/// `ρ₁ = K(x,x)` and `ρ₂ = K(x,x)K(y,y) + 2K(x,y)²`.
pub fn sample_permanental_cox(dk: &DiscretizedKernel, alpha: f64, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    if alpha != 2.0 {
        return Err(Error::Capability(format!(
            "the Cox sampler covers α = 2 only (got {alpha}); use the cumulant backend"
        )));
    }
    // M = √W K √W, so √W G has covariance M.
    let (values, vectors) = sym_eigen(&dk.matrix);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if let Some(&lo) = values.first() {
        if lo < -1e-10 * scale {
            return Err(Error::numerical("factorizing the kernel covariance (negative eigenvalue)", lo));
        }
    }
    let m = dk.len();
    let root = DMatrix::from_fn(m, m, |i, k| vectors[(i, k)] * values[k].max(0.0).sqrt());
    Ok((0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let field = &root * z;
            poisson_cells(field.iter().map(|g| g * g), &mut rng)
        })
        .collect())
}

/// Configurations of the Poisson process with intensity `K(x,x) f(x)`.
pub fn sample_poisson(dk: &DiscretizedKernel, n: usize, seed: u64) -> Vec<Configuration> {
    let means: Vec<f64> = (0..dk.len()).map(|i| dk.matrix[(i, i)]).collect();
    (0..n)
        .into_par_iter()
        .map(|s| poisson_cells(means.iter().copied(), &mut stream_rng(seed, s as u64)))
        .collect()
}

fn poisson_cells(means: impl Iterator<Item = f64>, rng: &mut ChaCha8Rng) -> Configuration {
    let mut out = Vec::new();
    for (i, lambda) in means.enumerate() {
        if lambda > 0.0 {
            let k = Poisson::new(lambda).map(|p| p.sample(rng) as usize).unwrap_or(0);
            out.extend(std::iter::repeat_n(i, k));
        }
    }
    out
}

/// Agreement of binned one- and two-point statistics with the
/// α-determinant correlation functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationValidation {
    pub samples: usize,
    pub bins: usize,
    /// Largest `|estimate − exact|/s.e.` over `E[N_A]`.
    pub rho1_max_z: f64,
    /// Largest `|estimate − exact|/s.e.` over `E[N_A N_B]` (`A ≠ B`) and
    /// `E[N_A(N_A − 1)]`.
    pub rho2_max_z: f64,
    /// Share of all compared moments within 3 s.e.
    pub fraction_within_3se: f64,
    /// Fewer than [`MIN_VALIDATION_SAMPLES`] samples.
    pub low_sample_warning: bool,
    /// At least 90% of the moments lie within 3 s.e.
    pub passed: bool,
}

fn z_score(values: &[f64], exact: f64) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let se = (var / n).sqrt();
    let diff = (mean - exact).abs();
    if se > 0.0 {
        diff / se
    } else if diff <= 1e-12 * (1.0 + exact.abs()) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Bins grid points into `bins` contiguous blocks (in grid order) and
/// compares `E[N_A]` with `Σ_{i∈A} M_ii` and the factorial moments
/// `E[N_A N_B]`, `E[N_A(N_A−1)]` with `Σ_{i∈A, j∈B} (M_ii M_jj + α M_ij²)`,
/// the binned one- and two-point functions `ρ₁ = K(x,x)` and
/// `ρ₂ = Det_α[K(x_a, x_b)]`.
pub fn correlation_validation(
    samples: &[Configuration],
    dk: &DiscretizedKernel,
    alpha: f64,
    bins: usize,
) -> Result<CorrelationValidation> {
    let m = dk.len();
    if samples.len() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    if bins == 0 || bins > m {
        return Err(Error::Argument(format!("bins must lie in 1..={m}, got {bins}")));
    }
    let bin_of = |i: usize| i * bins / m;
    let mut rho1 = vec![0.0; bins];
    let mut rho2 = vec![0.0; bins * bins];
    for i in 0..m {
        let mii = dk.matrix[(i, i)];
        rho1[bin_of(i)] += mii;
        for j in 0..m {
            rho2[bin_of(i) * bins + bin_of(j)] += mii * dk.matrix[(j, j)] + alpha * dk.matrix[(i, j)].powi(2);
        }
    }
    let counts: Vec<Vec<f64>> = samples
        .iter()
        .map(|cfg| {
            let mut c = vec![0.0; bins];
            for &i in cfg {
                if i >= m {
                    return Err(Error::Argument(format!("point index {i} outside the grid")));
                }
                c[bin_of(i)] += 1.0;
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut zs1 = Vec::with_capacity(bins);
    for a in 0..bins {
        let v: Vec<f64> = counts.iter().map(|c| c[a]).collect();
        zs1.push(z_score(&v, rho1[a]));
    }
    let mut zs2 = Vec::new();
    for a in 0..bins {
        for b in a..bins {
            let v: Vec<f64> = counts
                .iter()
                .map(|c| if a == b { c[a] * (c[a] - 1.0) } else { c[a] * c[b] })
                .collect();
            zs2.push(z_score(&v, rho2[a * bins + b]));
        }
    }
    let all = zs1.len() + zs2.len();
    let within = zs1.iter().chain(&zs2).filter(|z| **z < 3.0).count();
    let fraction = within as f64 / all as f64;
    Ok(CorrelationValidation {
        samples: samples.len(),
        bins,
        rho1_max_z: zs1.iter().copied().fold(0.0, f64::max),
        rho2_max_z: zs2.iter().copied().fold(0.0, f64::max),
        fraction_within_3se: fraction,
        low_sample_warning: samples.len() < MIN_VALIDATION_SAMPLES,
        passed: fraction >= 0.9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::kernel::{Grid, KernelSpec};
    use crate::numeric::stats::chi_square_test;

    fn gaussian_dk(alpha: f64, cells: usize) -> DiscretizedKernel {
        let spec = KernelSpec::gaussian(1, 0.5 / std::f64::consts::PI.sqrt(), 1.0, alpha).unwrap();
        let grid = Grid::new(vec![0.0], vec![6.0], vec![cells]).unwrap();
        DiscretizedKernel::on_grid(&spec, &grid).unwrap()
    }

    #[test]
    fn identity_and_zero_kernels() {
        let id = DiscretizedKernel::from_matrix(DMatrix::identity(5, 5), -1.0).unwrap();
        for s in sample_dpp_many(&id, 20, 1).unwrap() {
            assert_eq!(s, vec![0, 1, 2, 3, 4]);
        }
        let zero = DiscretizedKernel::from_matrix(DMatrix::zeros(4, 4), -1.0).unwrap();
        assert!(sample_dpp(&zero, 1).unwrap().is_empty());
        assert!(sample_permanental_cox(&zero, 2.0, 10, 1).unwrap().iter().all(|c| c.is_empty()));
    }

    #[test]
    fn rank_one_location_frequencies() {
        let v = [0.1, 0.2, 0.3, 0.4f64];
        let v: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
        let dk = DiscretizedKernel::from_matrix(DMatrix::from_fn(4, 4, |i, j| v[i] * v[j]), -1.0).unwrap();
        let samples = sample_dpp_many(&dk, 100_000, 7).unwrap();
        let mut counts = [0u64; 4];
        for s in &samples {
            assert_eq!(s.len(), 1);
            counts[s[0]] += 1;
        }
        let (_, p) = chi_square_test(&counts, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn dpp_count_mean_is_trace() {
        let dk = gaussian_dk(-1.0, 24);
        let n = 100_000;
        let sizes: Vec<f64> = sample_dpp_many(&dk, n, 3).unwrap().iter().map(|s| s.len() as f64).collect();
        let z = z_score(&sizes, dk.trace());
        assert!(z < 3.0, "z = {z}");
    }

    #[test]
    fn dpp_and_cox_correlations() {
        let dk = gaussian_dk(-1.0, 24);
        let rep = correlation_validation(&sample_dpp_many(&dk, 20_000, 5).unwrap(), &dk, -1.0, 6).unwrap();
        assert!(rep.passed && !rep.low_sample_warning, "{rep:?}");
        let dk2 = gaussian_dk(2.0, 24);
        let cox = sample_permanental_cox(&dk2, 2.0, 20_000, 5).unwrap();
        let rep = correlation_validation(&cox, &dk2, 2.0, 6).unwrap();
        assert!(rep.passed, "{rep:?}");
        // the same samples are inconsistent with the Poisson two-point function
        let wrong = correlation_validation(&cox, &dk2, 0.0, 6).unwrap();
        assert!(wrong.rho2_max_z > 5.0, "{wrong:?}");
        let pois = correlation_validation(&sample_poisson(&dk2, 20_000, 5), &dk2, 0.0, 6).unwrap();
        assert!(pois.passed, "{pois:?}");
    }

    #[test]
    fn rank_one_repulsion_and_errors() {
        let dk = DiscretizedKernel::from_matrix(DMatrix::from_element(4, 4, 0.25), -1.0).unwrap();
        let rep = correlation_validation(&sample_dpp_many(&dk, 2_000, 1).unwrap(), &dk, -1.0, 2).unwrap();
        assert!(rep.low_sample_warning);
        assert_eq!(rep.rho2_max_z, 0.0);
        let big = DiscretizedKernel::from_matrix(DMatrix::identity(3, 3) * 2.0, 1.0).unwrap();
        assert!(matches!(sample_dpp(&big, 0), Err(Error::Domain(_))));
        assert!(matches!(sample_permanental_cox(&dk, 1.0, 1, 0), Err(Error::Capability(_))));
    }

    #[test]
    fn deterministic_by_seed() {
        let dk = gaussian_dk(-1.0, 12);
        assert_eq!(sample_dpp_many(&dk, 50, 9).unwrap(), sample_dpp_many(&dk, 50, 9).unwrap());
    }
}
