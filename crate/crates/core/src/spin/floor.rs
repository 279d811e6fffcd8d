use serde::{Deserialize, Serialize};

use super::model::{QuadratureOrder, SpinMeasure, SpinModel};
use crate::error::{Error, Result};

/// Lower bound on the conditional variance of one spin given the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFloor {
    /// `min_{u ∈ [−M, M]^N} F(u)`.
    pub floor: f64,
    /// The tilt bound `M`.
    pub tilt_bound: f64,
    /// Where the minimum is attained.
    pub argmin: Vec<f64>,
    /// `F(0)`, the variance of `σ¹` under the normalized single-spin measure.
    pub untilted_variance: f64,
    /// `|σ¹|` is constant on the support (e.g. Ising). The floor is then
    /// the variance of the tilted law, which is positive only because the
    /// tilt is bounded.
    pub degenerate_support_caveat: bool,
}

/// `F(u) = f/h − (g/h)²` with `f = ∫(σ¹)² e^{u·σ}`, `g = ∫σ¹ e^{u·σ}` and
/// `h = ∫e^{u·σ}`: the variance of `σ¹` under the tilted single-spin law.
pub fn tilted_variance(measure: &SpinMeasure, order: &QuadratureOrder, tilt: &[f64]) -> Result<f64> {
    let n = measure.components();
    if tilt.len() != n {
        return Err(Error::Argument(format!("tilt has {} entries, expected {n}", tilt.len())));
    }
    let nodes = measure.nodes(order);
    Ok(tilted_variance_on(&nodes, tilt))
}

fn tilted_variance_on(nodes: &[super::model::SpinNode], tilt: &[f64]) -> f64 {
    let expo = |s: &[f64; 3]| tilt.iter().zip(s).map(|(u, x)| u * x).sum::<f64>();
    let top = nodes.iter().map(|nd| expo(&nd.spin)).fold(f64::NEG_INFINITY, f64::max);
    let (mut h, mut g, mut f) = (0.0, 0.0, 0.0);
    for nd in nodes {
        let w = nd.weight * (expo(&nd.spin) - top).exp();
        let x = nd.spin[0];
        h += w;
        g += w * x;
        f += w * x * x;
    }
    let m = g / h;
    (f / h - m * m).max(0.0)
}

fn support_is_degenerate(measure: &SpinMeasure) -> bool {
    match measure {
        SpinMeasure::Ising => true,
        SpinMeasure::Atomic { atoms } => {
            let a = atoms[0].0.abs();
            atoms.iter().all(|x| x.0.abs() == a)
        }
        _ => false,
    }
}

/// Grid points per axis for the initial search, by number of components.
fn grid_points(n: usize) -> usize {
    match n {
        1 => 2001,
        2 => 101,
        _ => 25,
    }
}

/// Minimum of the tilted variance over the cube `[−M, M]^N`: dense grid
/// followed by a compass search with step halving.
pub fn tilted_variance_floor(measure: &SpinMeasure, order: &QuadratureOrder, tilt_bound: f64) -> Result<VarianceFloor> {
    measure.validate()?;
    if !(tilt_bound >= 0.0) || !tilt_bound.is_finite() {
        return Err(Error::Argument(format!("tilt bound must be finite and nonnegative, got {tilt_bound}")));
    }
    let n = measure.components();
    let nodes = measure.nodes(order);
    let eval = |u: &[f64]| tilted_variance_on(&nodes, u);
    let untilted = eval(&vec![0.0; n]);
    let mut best = (untilted, vec![0.0; n]);
    if tilt_bound > 0.0 {
        let k = grid_points(n);
        let step = 2.0 * tilt_bound / (k - 1) as f64;
        let axis: Vec<f64> = (0..k).map(|i| -tilt_bound + step * i as f64).collect();
        let total = k.pow(n as u32);
        let mut u = vec![0.0; n];
        for idx in 0..total {
            let mut r = idx;
            for c in u.iter_mut() {
                *c = axis[r % k];
                r /= k;
            }
            let v = eval(&u);
            if v < best.0 {
                best = (v, u.clone());
            }
        }
        let mut h = step;
        while h > 1e-12 * (1.0 + tilt_bound) {
            let mut improved = false;
            for i in 0..n {
                for dir in [-1.0, 1.0] {
                    let mut cand = best.1.clone();
                    cand[i] = (cand[i] + dir * h).clamp(-tilt_bound, tilt_bound);
                    let v = eval(&cand);
                    if v < best.0 {
                        best = (v, cand);
                        improved = true;
                    }
                }
            }
            if !improved {
                h /= 2.0;
            }
        }
    }
    Ok(VarianceFloor {
        floor: best.0,
        tilt_bound,
        argmin: best.1,
        untilted_variance: untilted,
        degenerate_support_caveat: support_is_degenerate(measure),
    })
}

/// `M = β(H + 2dJ)` with `H = max |h_x^i|` and `J = max |J_e^i|`: a bound on
/// every component of the effective tilt `β(h_x + Σ_y J_xy σ_y)` seen by a
/// single spin given its neighbours.
pub fn conditional_tilt_bound(model: &SpinModel) -> f64 {
    let d = model.lattice().dim as f64;
    model.beta() * (model.max_field() + 2.0 * d * model.max_coupling())
}

/// Floor on `Var(σ_x¹ | σ_y, y ≠ x)` uniform in the boundary configuration.
pub fn conditional_variance_floor(model: &SpinModel) -> Result<VarianceFloor> {
    tilted_variance_floor(model.measure(), model.quadrature(), conditional_tilt_bound(model))
}

#[cfg(test)]
mod tests {
    use super::super::model::Lattice;
    use super::*;
    use crate::numeric::Complex64;
    use approx::assert_abs_diff_eq;

    fn q() -> QuadratureOrder {
        QuadratureOrder::default()
    }

    #[test]
    fn ising_floor_closed_form() {
        let f = tilted_variance_floor(&SpinMeasure::Ising, &q(), 2.0).unwrap();
        let exact = 1.0 - 2f64.tanh().powi(2);
        assert_abs_diff_eq!(f.floor, exact, epsilon = 1e-14);
        assert_abs_diff_eq!(f.floor, 0.0707, epsilon = 1e-4);
        assert_abs_diff_eq!(f.argmin[0].abs(), 2.0, epsilon = 1e-14);
        assert!(f.degenerate_support_caveat);
    }

    #[test]
    fn ising_profile_is_sech_squared() {
        for u in [-1.5, 0.0, 0.3, 4.0] {
            let v = tilted_variance(&SpinMeasure::Ising, &q(), &[u]).unwrap();
            assert_abs_diff_eq!(v, 1.0 - u.tanh().powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn untilted_variances() {
        let cases = [
            (SpinMeasure::Ising, 1.0),
            (SpinMeasure::Circle, 0.5),
            (SpinMeasure::Sphere, 1.0 / 3.0),
            (SpinMeasure::Atomic { atoms: vec![(-2.0, 1.0), (0.0, 2.0), (2.0, 1.0)] }, 2.0),
        ];
        for (m, v) in cases {
            let f = tilted_variance_floor(&m, &q(), 0.0).unwrap();
            assert_abs_diff_eq!(f.floor, v, epsilon = 1e-13);
            assert_abs_diff_eq!(f.untilted_variance, v, epsilon = 1e-13);
        }
    }

    #[test]
    fn xy_floor_below_half_and_positive() {
        let f = tilted_variance_floor(&SpinMeasure::Circle, &q(), 1.5).unwrap();
        assert!(f.floor > 0.0 && f.floor <= 0.5);
        assert!(!f.degenerate_support_caveat);
        // the minimum is no larger than at any grid-free test point
        for u in [[1.5, 0.0], [1.5, 1.5], [-0.7, 1.1]] {
            assert!(f.floor <= tilted_variance(&SpinMeasure::Circle, &q(), &u).unwrap() + 1e-15);
        }
    }

    #[test]
    fn model_tilt_bound() {
        let m = SpinModel::ising(Lattice::new(2, 3, false).unwrap(), 0.5, -0.25, 2.0).unwrap();
        assert_abs_diff_eq!(conditional_tilt_bound(&m), 2.0 * (0.25 + 4.0 * 0.5), epsilon = 1e-15);
        let f = conditional_variance_floor(&m).unwrap();
        assert_abs_diff_eq!(f.floor, 1.0 - 4.5f64.tanh().powi(2), epsilon = 1e-14);
    }

    #[test]
    fn heisenberg_floor_positive() {
        let m = SpinModel::new(
            Lattice::new(3, 2, false).unwrap(),
            SpinMeasure::Sphere,
            [1.0, 0.5, 0.5],
            [Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            0.5,
        )
        .unwrap();
        let f = conditional_variance_floor(&m).unwrap();
        assert!(f.floor > 0.0 && f.floor < 1.0 / 3.0, "{}", f.floor);
    }
}
