//! Bessel functions of the first kind for the orders the ball-Fourier
//! kernel needs (`ν = d/2`, so integer or half-integer).

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

/// `J_ν(x)` for `x ≥ 0` and `2ν` a nonnegative integer.
///
/// Integer orders use the trapezoid rule on Bessel's integral, which is
/// exponentially convergent once the node count exceeds `ν + x`. Half-integer
/// orders go through the spherical Bessel functions.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    let twice = (2.0 * nu).round();
    assert!(
        (2.0 * nu - twice).abs() < 1e-12 && twice >= 0.0,
        "order must be integer or half-integer"
    );
    assert!(x >= 0.0, "argument must be nonnegative");
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if twice as i64 % 2 == 0 {
        bessel_j_integer(nu as u32, x)
    } else {
        let n = ((twice as i64 - 1) / 2) as u32;
        (2.0 * x / PI).sqrt() * spherical_j(n, x)
    }
}

fn bessel_j_integer(n: u32, x: f64) -> f64 {
    if x < 1.0 {
        return bessel_j_series(n as f64, x);
    }
    let nodes = (n as f64 + x + 48.0).ceil() as usize;
    let h = 2.0 * PI / nodes as f64;
    let nf = n as f64;
    let s: f64 = (0..nodes)
        .map(|k| {
            let t = k as f64 * h;
            (nf * t - x * t.sin()).cos()
        })
        .sum();
    s / nodes as f64
}

/// Spherical Bessel `j_n(x)`; upward recurrence when `x > n`, power series
/// otherwise (where upward recurrence loses accuracy).
pub fn spherical_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= n as f64 + 1.0 {
        let nu = n as f64 + 0.5;
        return bessel_j_series(nu, x) * (PI / (2.0 * x)).sqrt();
    }
    let j0 = x.sin() / x;
    if n == 0 {
        return j0;
    }
    let mut prev = j0;
    let mut cur = x.sin() / (x * x) - x.cos() / x;
    for k in 1..n {
        let next = (2.0 * k as f64 + 1.0) / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Ascending power series `Σ (-1)^k (x/2)^{2k+ν} / (k! Γ(k+ν+1))`.
///
/// Accurate for moderate `x` (cancellation grows like `e^x`).
pub fn bessel_j_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    let q = -half * half;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integer_order_matches_series_where_series_is_reliable() {
        for &x in &[0.3, 1.0, 2.5, 5.0, 8.0] {
            for n in 0..4 {
                assert_abs_diff_eq!(
                    bessel_j(n as f64, x),
                    bessel_j_series(n as f64, x),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn known_values() {
        // Abramowitz & Stegun table 9.1
        assert_abs_diff_eq!(bessel_j(0.0, 1.0), 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(1.0, 1.0), 0.440_050_585_744_933_5, epsilon = 1e-15);
        assert_abs_diff_eq!(bessel_j(1.0, 10.0), 0.043_472_746_168_861_44, epsilon = 1e-14);
        // first zero of J1
        assert!(bessel_j(1.0, 3.831_705_970_207_512).abs() < 1e-13);
    }

    #[test]
    fn half_integer_closed_forms() {
        for &x in &[0.2, 1.0, 3.0, 12.0, 40.0] {
            let j12 = (2.0 / (PI * x)).sqrt() * x.sin();
            assert_abs_diff_eq!(bessel_j(0.5, x), j12, epsilon = 1e-13);
            let j32 = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
            assert_abs_diff_eq!(bessel_j(1.5, x), j32, epsilon = 1e-13);
        }
    }

    #[test]
    fn large_argument_asymptotics() {
        let x = 200.0;
        let asym = (2.0 / (PI * x)).sqrt() * (x - 0.75 * PI).cos();
        assert_abs_diff_eq!(bessel_j(1.0, x), asym, epsilon = 2e-4);
    }
}
