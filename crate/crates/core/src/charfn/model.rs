use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::Complex64;

/// Pure map `u ↦ E[e^{uX}]`, shareable across worker threads.
pub type Evaluator = Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>;

/// A real random variable described by its moment generating function on a
/// disk `|u| ≤ validity_radius`.
#[derive(Clone)]
pub struct CharFnModel {
    evaluator: Evaluator,
    pub validity_radius: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub description: String,
}

impl fmt::Debug for CharFnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharFnModel")
            .field("description", &self.description)
            .field("validity_radius", &self.validity_radius)
            .field("mean", &self.mean)
            .field("std_dev", &self.std_dev)
            .finish()
    }
}

impl CharFnModel {
    pub fn new(
        evaluator: Evaluator,
        validity_radius: f64,
        mean: f64,
        std_dev: f64,
        description: impl Into<String>,
    ) -> Self {
        CharFnModel {
            evaluator,
            validity_radius,
            mean,
            std_dev,
            description: description.into(),
        }
    }

    pub fn from_fn<F>(f: F, validity_radius: f64, mean: f64, std_dev: f64, description: &str) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    {
        Self::new(Arc::new(f), validity_radius, mean, std_dev, description)
    }

    /// `E[e^{uX}]`; errors outside the validity disk.
    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        if u.norm() > self.validity_radius * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "|u| = {} exceeds validity radius {} of {}",
                u.norm(),
                self.validity_radius,
                self.description
            )));
        }
        (self.evaluator)(u)
    }

    /// The characteristic function `Ψ(t) = E[e^{itX}]` at real `t`.
    pub fn charfn(&self, t: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, t))
    }

    /// Evaluates without the validity check; for internal loops that have
    /// already validated their radius.
    pub(crate) fn eval_unchecked(&self, u: Complex64) -> Result<Complex64> {
        (self.evaluator)(u)
    }

    pub fn is_degenerate(&self) -> bool {
        self.std_dev == 0.0
    }

    /// Model of `X - E[X]`.
    pub fn centered(&self) -> CharFnModel {
        let inner = self.evaluator.clone();
        let mean = self.mean;
        CharFnModel::new(
            Arc::new(move |u| Ok(inner(u)? * (-u * mean).exp())),
            self.validity_radius,
            0.0,
            self.std_dev,
            format!("centered({})", self.description),
        )
    }

    /// Model of `(X - E[X]) / σ`; the validity radius scales by `σ`.
    pub fn standardized(&self) -> Result<CharFnModel> {
        if self.std_dev <= 0.0 {
            return Err(Error::Degenerate(format!(
                "cannot standardize {} with σ = {}",
                self.description, self.std_dev
            )));
        }
        let inner = self.evaluator.clone();
        let (mean, sd) = (self.mean, self.std_dev);
        Ok(CharFnModel::new(
            Arc::new(move |u| Ok(inner(u / sd)? * (-u * mean / sd).exp())),
            self.validity_radius * sd,
            0.0,
            1.0,
            format!("standardized({})", self.description),
        ))
    }

    /// Sum of `n` independent copies.
    pub fn iid_sum(&self, n: u32) -> CharFnModel {
        let inner = self.evaluator.clone();
        CharFnModel::new(
            Arc::new(move |u| Ok(inner(u)?.powu(n))),
            self.validity_radius,
            self.mean * n as f64,
            self.std_dev * (n as f64).sqrt(),
            format!("iid_sum({}, n={n})", self.description),
        )
    }

    pub fn gaussian(mean: f64, sd: f64) -> CharFnModel {
        CharFnModel::from_fn(
            move |u| Ok((u * mean + 0.5 * sd * sd * u * u).exp()),
            f64::INFINITY,
            mean,
            sd,
            &format!("gaussian(mean={mean}, sd={sd})"),
        )
    }

    /// Fair ±1 variable, `E[e^{uX}] = cosh u`.
    pub fn rademacher() -> CharFnModel {
        CharFnModel::from_fn(|u| Ok(u.cosh()), f64::INFINITY, 0.0, 1.0, "rademacher")
    }

    pub fn binomial(n: u32, p: f64) -> CharFnModel {
        CharFnModel::from_fn(
            move |u| Ok((u.exp() * p + (1.0 - p)).powu(n)),
            f64::INFINITY,
            n as f64 * p,
            (n as f64 * p * (1.0 - p)).sqrt(),
            &format!("binomial(n={n}, p={p})"),
        )
    }

    /// `N - λ` for `N ~ Poisson(λ)`.
    pub fn poisson_centered(lambda: f64) -> CharFnModel {
        CharFnModel::from_fn(
            move |u| Ok(((u.exp() - 1.0 - u) * lambda).exp()),
            f64::INFINITY,
            0.0,
            lambda.sqrt(),
            &format!("poisson_centered(lambda={lambda})"),
        )
    }

    /// Point mass at `value`.
    pub fn degenerate(value: f64) -> CharFnModel {
        CharFnModel::from_fn(
            move |u| Ok((u * value).exp()),
            f64::INFINITY,
            value,
            0.0,
            &format!("degenerate({value})"),
        )
    }

    /// Finite discrete law `Σ p_k δ_{x_k}`; probabilities are normalized.
    pub fn discrete(atoms: Vec<(f64, f64)>, description: &str) -> Result<CharFnModel> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || total <= 0.0 || atoms.iter().any(|a| a.1 < 0.0) {
            return Err(Error::Argument("discrete law needs nonnegative weights with positive mass".into()));
        }
        let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(x, p)| (x, p / total)).collect();
        let mean: f64 = atoms.iter().map(|(x, p)| x * p).sum();
        let var: f64 = atoms.iter().map(|(x, p)| (x - mean).powi(2) * p).sum();
        Ok(CharFnModel::from_fn(
            move |u| Ok(atoms.iter().map(|&(x, p)| (u * x).exp() * p).sum()),
            f64::INFINITY,
            mean,
            var.sqrt(),
            description,
        ))
    }

    /// One Ising spin in field `h` at inverse temperature `β`:
    /// `E[e^{uσ}] = cosh(βh + u) / cosh(βh)`.
    pub fn ising_site(beta: f64, h: f64) -> CharFnModel {
        let bh = beta * h;
        let norm = bh.cosh();
        CharFnModel::from_fn(
            move |u| Ok((u + bh).cosh() / norm),
            f64::INFINITY,
            bh.tanh(),
            (1.0 - bh.tanh().powi(2)).sqrt(),
            &format!("ising_site(beta={beta}, h={h})"),
        )
    }
}

/// `E[e^{uX}]` at complex `u`.
pub fn eval_charfn(model: &CharFnModel, u: Complex64) -> Result<Complex64> {
    model.eval(u)
}

/// Smallest zero modulus of `cosh(a + u)`: zeros at `u = -a + i(π/2 + kπ)`.
#[cfg(test)]
pub(crate) fn cosh_shift_first_zero(a: f64) -> f64 {
    (a * a + std::f64::consts::FRAC_PI_2.powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn builtins() -> Vec<CharFnModel> {
        vec![
            CharFnModel::gaussian(0.3, 1.2),
            CharFnModel::rademacher(),
            CharFnModel::binomial(7, 0.3),
            CharFnModel::poisson_centered(4.0),
            CharFnModel::degenerate(0.7),
            CharFnModel::ising_site(1.0, 0.4),
            CharFnModel::rademacher().iid_sum(5).standardized().unwrap(),
        ]
    }

    #[test]
    fn gaussian_values() {
        let g = CharFnModel::gaussian(0.0, 1.0);
        assert_eq!(g.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_abs_diff_eq!(g.eval(c(2.0, 0.0)).unwrap().re, 7.389_056_098_930_65, epsilon = 1e-12);
    }

    #[test]
    fn rademacher_on_imaginary_axis_is_cosine() {
        let r = CharFnModel::rademacher();
        for k in 0..20 {
            let t = -3.0 + 0.31 * k as f64;
            let v = r.charfn(t).unwrap();
            assert_abs_diff_eq!(v.re, t.cos(), epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn domain_error_outside_validity() {
        let m = CharFnModel::from_fn(|_| Ok(c(1.0, 0.0)), 1.0, 0.0, 0.0, "unit");
        assert!(matches!(m.eval(c(0.0, 1.5)), Err(Error::Domain(_))));
        assert!(m.eval(c(0.0, 1.0)).is_ok());
    }

    #[test]
    fn normalization_at_zero() {
        for m in builtins() {
            let v = m.eval(c(0.0, 0.0)).unwrap();
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn ising_site_at_pi() {
        let m = CharFnModel::ising_site(1.0, 1.0);
        let v = m.charfn(PI).unwrap();
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cosh_shift_first_zero(1.0), 1.862_095_889_118_586_6, epsilon = 1e-12);
    }

    #[test]
    fn standardization_moves_moments() {
        let m = CharFnModel::binomial(10, 0.5).standardized().unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.std_dev, 1.0);
        // second derivative at zero = 1 for a standardized variable
        let h = 1e-3;
        let f = |x: f64| m.eval(c(x, 0.0)).unwrap().re;
        let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert_abs_diff_eq!(second, 1.0, epsilon = 1e-5);
        assert!(CharFnModel::degenerate(0.0).standardized().is_err());
    }

    proptest! {
        #[test]
        fn hermitian_symmetry(re in -2.0f64..2.0, im in -2.0f64..2.0) {
            for m in builtins() {
                let u = c(re, im);
                let a = m.eval(u.conj()).unwrap();
                let b = m.eval(u).unwrap().conj();
                prop_assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
            }
        }

        #[test]
        fn charfn_bounded_on_real_line(t in -20.0f64..20.0) {
            for m in builtins() {
                prop_assert!(m.charfn(t).unwrap().norm() <= 1.0 + 1e-12);
            }
        }
    }
}
