//! Thin wrappers over nalgebra for the dense problems used here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Complex64;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Square root of a symmetric positive semi-definite matrix. Eigenvalues
/// below zero (round-off) are clamped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(m);
    let roots = DVector::from_iterator(values.len(), values.iter().map(|v| v.max(0.0).sqrt()));
    let scaled = &vectors * DMatrix::from_diagonal(&roots);
    scaled * vectors.transpose()
}

pub fn complex_det(m: DMatrix<Complex64>) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.lu().determinant()
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
pub fn complex_eigenvalues(m: DMatrix<Complex64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = m.schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// Largest singular value.
pub fn spectral_norm_complex(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn psd_sqrt_squares_back() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.7]);
        let s = psd_sqrt(&a);
        let back = &s * &s;
        for (x, y) in back.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn complex_schur_eigenvalues_are_consistent_with_det_and_trace() {
        let m = DMatrix::from_fn(4, 4, |i, j| {
            Complex64::new((i * 3 + j) as f64 * 0.1 - 0.4, ((i + 2 * j) % 3) as f64 * 0.2)
        });
        let eig = complex_eigenvalues(m.clone());
        let prod: Complex64 = eig.iter().product();
        let sum: Complex64 = eig.iter().sum();
        let det = complex_det(m.clone());
        assert!((prod - det).norm() < 1e-12);
        assert!((sum - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn rotation_has_imaginary_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut eig = complex_eigenvalues(to_complex(&m));
        eig.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_abs_diff_eq!(eig[0].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig[1].im, 1.0, epsilon = 1e-14);
    }
}
