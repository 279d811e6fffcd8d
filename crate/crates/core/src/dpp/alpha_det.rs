use std::ops::{Add, Mul};

use nalgebra::{DMatrix, Scalar};

use crate::error::{Error, Result};
use crate::numeric::Complex64;

/// Largest order handled by the permutation sum (`n!` terms).
pub const MAX_ALPHA_DET_ORDER: usize = 10;

trait Field: Scalar + Copy + Add<Output = Self> + Mul<Output = Self> + From<f64> {}
impl Field for f64 {}
impl Field for Complex64 {}

/// Partial permutation as a set of disjoint paths. Row `i` (assigned in
/// order) is always the end of its path; column `j` must be a path start.
struct Walk<'a, T> {
    a: &'a DMatrix<T>,
    n: usize,
    /// `end_of[s]`: end of the path starting at `s`, for path starts.
    end_of: Vec<usize>,
    /// `start_of[e]`: start of the path ending at `e`, for path ends.
    start_of: Vec<usize>,
    used_col: Vec<bool>,
    /// Sums of `Π A_{iσ(i)}` grouped by the number of cycles of `σ`.
    by_cycles: Vec<T>,
}

impl<T: Field> Walk<'_, T> {
    fn run(&mut self, row: usize, prod: T, cycles: usize) {
        if row == self.n {
            self.by_cycles[cycles] = self.by_cycles[cycles] + prod;
            return;
        }
        let s = self.start_of[row];
        for col in 0..self.n {
            if self.used_col[col] {
                continue;
            }
            let entry = self.a[(row, col)];
            let p = prod * entry;
            self.used_col[col] = true;
            if col == s {
                self.run(row + 1, p, cycles + 1);
            } else {
                // merge path s→…→row with col→…→e into s→…→e
                let e = self.end_of[col];
                let (old_end, old_start) = (self.end_of[s], self.start_of[e]);
                self.end_of[s] = e;
                self.start_of[e] = s;
                self.run(row + 1, p, cycles);
                self.end_of[s] = old_end;
                self.start_of[e] = old_start;
            }
            self.used_col[col] = false;
        }
    }
}

fn by_cycle_count<T: Field>(a: &DMatrix<T>) -> Result<Vec<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Argument(format!("α-determinant needs a square matrix, got {}×{}", n, a.ncols())));
    }
    if n > MAX_ALPHA_DET_ORDER {
        return Err(Error::Capability(format!(
            "permutation sum is limited to n ≤ {MAX_ALPHA_DET_ORDER} (got {n}); use the Fredholm determinant path"
        )));
    }
    let mut walk = Walk {
        a,
        n,
        end_of: (0..n).collect(),
        start_of: (0..n).collect(),
        used_col: vec![false; n],
        by_cycles: vec![T::from(0.0); n + 1],
    };
    walk.run(0, T::from(1.0), 0);
    Ok(walk.by_cycles)
}

fn combine<T: Field>(by_cycles: &[T], alpha: f64) -> T {
    let n = by_cycles.len() - 1;
    by_cycles
        .iter()
        .enumerate()
        .fold(T::from(0.0), |acc, (nu, &c)| acc + c * T::from(alpha.powi((n - nu) as i32)))
}

/// `Σ_{σ ∈ S_n} α^{n − ν(σ)} Π_i A_{iσ(i)}` with `ν(σ)` the number of cycles:
/// the determinant at `α = −1`, the permanent at `α = 1` and the diagonal
/// product at `α = 0`.
pub fn alpha_det(a: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    Ok(combine(&by_cycle_count(a)?, alpha))
}

pub fn alpha_det_complex(a: &DMatrix<Complex64>, alpha: f64) -> Result<Complex64> {
    Ok(combine(&by_cycle_count(a)?, alpha))
}

/// Coefficients `c_ν` of `Det_α[A] = Σ_ν c_ν α^{n−ν}`, indexed by cycle
/// count `ν = 0..=n`.
pub fn alpha_det_cycle_polynomial(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    by_cycle_count(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    use crate::numeric::rng::stream_rng;

    /// Ryser's formula with Gray-code-free subset enumeration.
    fn ryser(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        let mut total = 0.0;
        for mask in 1u32..(1 << n) {
            let prod: f64 = (0..n)
                .map(|i| (0..n).filter(|j| mask >> j & 1 == 1).map(|j| a[(i, j)]).sum::<f64>())
                .product();
            let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * prod;
        }
        total
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 5.0, 7.0]);
        for alpha in [-1.0, 0.0, 0.5, 2.0] {
            assert_relative_eq!(alpha_det(&a, alpha).unwrap(), 14.0 + alpha * 15.0);
        }
    }

    #[test]
    fn identity_and_ones() {
        let id = DMatrix::<f64>::identity(3, 3);
        let ones = DMatrix::from_element(3, 3, 1.0);
        for alpha in [-1.0, 0.0, 1.0, 2.0, -0.3] {
            assert_relative_eq!(alpha_det(&id, alpha).unwrap(), 1.0);
            assert_relative_eq!(alpha_det(&ones, alpha).unwrap(), 1.0 + 3.0 * alpha + 2.0 * alpha * alpha);
        }
        assert_eq!(alpha_det_cycle_polynomial(&ones).unwrap(), vec![0.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn determinant_and_permanent() {
        let mut rng = stream_rng(3, 0);
        for n in 1..=7 {
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            assert_relative_eq!(alpha_det(&a, -1.0).unwrap(), a.determinant(), max_relative = 1e-10, epsilon = 1e-13);
            assert_relative_eq!(alpha_det(&a, 1.0).unwrap(), ryser(&a), max_relative = 1e-10, epsilon = 1e-13);
        }
    }

    #[test]
    fn complex_entries() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(1.0, -1.0),
            ],
        );
        let v = alpha_det_complex(&a, -1.0).unwrap();
        assert_relative_eq!(v.re, 2.0);
        assert_relative_eq!(v.im, -6.0);
    }

    #[test]
    fn rejects_large_or_rectangular() {
        assert!(matches!(alpha_det(&DMatrix::zeros(11, 11), 1.0), Err(Error::Capability(_))));
        assert!(matches!(alpha_det(&DMatrix::zeros(2, 3), 1.0), Err(Error::Argument(_))));
        assert_eq!(alpha_det(&DMatrix::zeros(0, 0), 2.0).unwrap(), 1.0);
    }
}
