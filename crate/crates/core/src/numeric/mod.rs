//! Numerical building blocks shared by the engines.

pub mod bessel;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use num_complex::Complex64;

/// `log⁺ x = max(log x, 0)`, with `log⁺ x = 0` for `x ≤ 0`.
pub fn log_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.ln()
    } else {
        0.0
    }
}

/// `log⁺ log m`, the growth term appearing in the KS bound.
pub fn log_plus_log(m: f64) -> f64 {
    if m > 1.0 {
        log_plus(m.ln())
    } else {
        0.0
    }
}

/// Same as [`log_plus_log`] but takes `log m` directly, so that
/// astronomically large maxima do not overflow.
pub fn log_plus_of_log(log_m: f64) -> f64 {
    log_plus(log_m)
}
