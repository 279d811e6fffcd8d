use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::{MAX_ENUMERATION_SITES};
use super::model::{SpinMeasure, SpinModel};
use crate::error::{Error, Result};
use crate::numeric::poly::real_poly_roots;
use crate::numeric::Complex64;

/// Zeros of the Ising partition function in the fugacity `z = e^{2βh}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeeYangReport {
    /// Roots of `P(z) = Σ_k c_k z^k`, sorted by argument.
    pub fugacity_zeros: Vec<Complex64>,
    /// `c_k`: Boltzmann weight of configurations with `k` up spins at zero
    /// field, rescaled by a common positive factor.
    pub coefficients: Vec<f64>,
    pub max_abs_deviation_from_unit_circle: f64,
    /// Smallest `|u|` at which `Ψ_S(u) = Z(h + iu/β)/Z(h)` vanishes.
    pub zero_free_field_radius: f64,
    /// The zero of `Ψ_S` attaining that radius.
    pub nearest_charfn_zero: Complex64,
    pub ferromagnetic: bool,
}

/// `u` with `Ψ_S(u) = 0` corresponding to the fugacity zero `z`:
/// `e^{2βh + 2iu} = z`, on the branch with the smallest real part.
pub fn charfn_zero_from_fugacity(z: Complex64, beta: f64, h: f64) -> Complex64 {
    Complex64::new(0.5 * z.arg(), -0.5 * (z.norm().ln() - 2.0 * beta * h))
}

/// Fugacity polynomial, its roots, the distance of the roots from the unit
/// circle and the induced zero-free radius of the total-spin characteristic
/// function.
pub fn lee_yang_zeros(model: &SpinModel) -> Result<LeeYangReport> {
    if *model.measure() != SpinMeasure::Ising {
        return Err(Error::Capability("Lee–Yang polynomial needs ±1 Ising spins".into()));
    }
    let sites = model.sites();
    if sites > MAX_ENUMERATION_SITES {
        return Err(Error::Capability(format!(
            "fugacity coefficients are enumerated for at most {MAX_ENUMERATION_SITES} sites, got {sites}"
        )));
    }
    let h0 = model.field()[0][0];
    if model.field().iter().any(|h| h[0] != h0) || h0.im != 0.0 {
        return Err(Error::Argument("Lee–Yang zeros need a uniform real field".into()));
    }
    let h = h0.re;
    let beta = model.beta();
    let couplings: Vec<f64> = model.couplings().iter().map(|j| j[0]).collect();
    let shift: f64 = beta * couplings.iter().map(|j| j.abs()).sum::<f64>();
    let edges = model.edges().to_vec();
    let states: u64 = 1 << sites;
    let chunks = states.min(256);
    let per = states.div_ceil(chunks);
    let partial: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut coeffs = vec![0.0; sites + 1];
            for state in c * per..((c + 1) * per).min(states) {
                let spin = |x: usize| if state >> x & 1 == 1 { 1.0 } else { -1.0 };
                let e: f64 = edges
                    .iter()
                    .zip(&couplings)
                    .map(|(&(x, y), j)| j * spin(x) * spin(y))
                    .sum();
                coeffs[state.count_ones() as usize] += (beta * e - shift).exp();
            }
            coeffs
        })
        .collect();
    let mut coefficients = vec![0.0; sites + 1];
    for p in partial {
        for (c, v) in coefficients.iter_mut().zip(p) {
            *c += v;
        }
    }
    let fugacity_zeros = real_poly_roots(&coefficients)?;
    let max_dev = fugacity_zeros
        .iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let nearest = fugacity_zeros
        .iter()
        .map(|&z| charfn_zero_from_fugacity(z, beta, h))
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or_else(|| Error::Degenerate("fugacity polynomial has no zeros".into()))?;
    Ok(LeeYangReport {
        fugacity_zeros,
        coefficients,
        max_abs_deviation_from_unit_circle: max_dev,
        zero_free_field_radius: nearest.norm(),
        nearest_charfn_zero: nearest,
        ferromagnetic: model.is_ferromagnetic(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::exact::{total_spin_charfn, total_spin_model};
    use super::super::model::Lattice;
    use super::*;
    use crate::charfn::{zero_free_radius, ScanOptions};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ising(dim: usize, side: usize, j: f64, h: f64, beta: f64) -> SpinModel {
        SpinModel::ising(Lattice::new(dim, side, false).unwrap(), j, h, beta).unwrap()
    }

    #[test]
    fn single_site_zero_at_minus_one() {
        for beta in [0.3, 1.0, 2.5] {
            let rep = lee_yang_zeros(&ising(1, 1, 1.0, 0.0, beta)).unwrap();
            assert_eq!(rep.fugacity_zeros.len(), 1);
            assert_abs_diff_eq!(rep.fugacity_zeros[0].re, -1.0, epsilon = 1e-15);
            assert_eq!(rep.max_abs_deviation_from_unit_circle, 0.0);
            assert_abs_diff_eq!(rep.zero_free_field_radius, PI / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_site_quadratic_formula() {
        let rep = lee_yang_zeros(&ising(1, 2, 1.0, 0.0, 1.0)).unwrap();
        let re = -(-2.0f64).exp();
        let im = (1.0 - (-4.0f64).exp()).sqrt();
        let mut zs = rep.fugacity_zeros.clone();
        zs.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_abs_diff_eq!(zs[0].re, re, epsilon = 1e-14);
        assert_abs_diff_eq!(zs[0].im, -im, epsilon = 1e-14);
        assert_abs_diff_eq!(zs[1].im, im, epsilon = 1e-14);
        assert!(rep.max_abs_deviation_from_unit_circle < 1e-14);
    }

    #[test]
    fn three_by_three_on_unit_circle() {
        let rep = lee_yang_zeros(&ising(2, 3, 1.0, 0.0, 0.4)).unwrap();
        assert_eq!(rep.fugacity_zeros.len(), 9);
        assert!(rep.max_abs_deviation_from_unit_circle < 1e-8);
    }

    #[test]
    fn antiferromagnet_leaves_the_circle() {
        let rep = lee_yang_zeros(&ising(1, 2, -1.0, 0.0, 1.0)).unwrap();
        assert!(!rep.ferromagnetic);
        assert!(rep.max_abs_deviation_from_unit_circle > 0.5);
        for z in &rep.fugacity_zeros {
            assert!(z.im.abs() < 1e-12 && z.re < 0.0);
        }
    }

    #[test]
    fn charfn_vanishes_at_reported_zero() {
        let m = ising(1, 3, 0.8, 0.3, 0.7);
        let rep = lee_yang_zeros(&m).unwrap();
        let v = total_spin_charfn(&m, rep.nearest_charfn_zero).unwrap();
        assert!(v.norm() < 1e-12, "{v}");
    }

    #[test]
    fn field_radius_agrees_with_disk_scan() {
        for (side, h) in [(2, 0.2), (3, 0.0), (4, 0.5)] {
            let m = ising(1, side, 1.0, h, 1.0);
            let rep = lee_yang_zeros(&m).unwrap();
            let model = total_spin_model(&m).unwrap();
            let scan = zero_free_radius(&model, 3.0, 0.05, &ScanOptions::default()).unwrap();
            assert_abs_diff_eq!(scan.zero_free_radius, rep.zero_free_field_radius, epsilon = 1e-5);
        }
    }

    #[test]
    fn rejects_non_ising() {
        let m = SpinModel::new(
            Lattice::new(1, 2, false).unwrap(),
            SpinMeasure::Circle,
            [1.0, 0.0, 0.0],
            [Complex64::new(0.0, 0.0); 3],
            1.0,
        )
        .unwrap();
        assert!(matches!(lee_yang_zeros(&m), Err(Error::Capability(_))));
    }
}
