//! Polynomial roots via companion-matrix eigenvalues plus Newton polishing.

use nalgebra::DMatrix;

use super::Complex64;
use crate::error::{Error, Result};

/// Evaluates `Σ c_k z^k` (coefficients ascending) and its derivative.
pub fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a real polynomial with ascending coefficients.
///
/// Trailing (highest-degree) zero coefficients are dropped. Each eigenvalue
/// of the companion matrix is refined by Newton steps on the original
/// polynomial while the residual keeps decreasing.
pub fn real_poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let mut deg = coeffs.len();
    while deg > 0 && coeffs[deg - 1] == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Err(Error::Argument("zero polynomial has no well-defined roots".into()));
    }
    let coeffs = &coeffs[..deg];
    let n = deg - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    for z in roots.iter_mut() {
        *z = polish(coeffs, *z);
    }
    roots.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    Ok(roots)
}

fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = eval_with_derivative(coeffs, z);
    for _ in 0..50 {
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let candidate = z - step;
        let (pc, dpc) = eval_with_derivative(coeffs, candidate);
        if pc.norm() >= p.norm() {
            break;
        }
        z = candidate;
        p = pc;
        dp = dpc;
        if step.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}
