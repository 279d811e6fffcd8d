//! Built-in models addressable by name and parameters.
//!
//! A model string is `name` or `name:key=value,key=value,...`:
//!
//! | name | keys (defaults) |
//! |---|---|
//! | `gaussian` | `mean` (0), `sd` (1) |
//! | `rademacher` | none |
//! | `binomial` | `n`, `p` |
//! | `poisson_centered` | `lambda` |
//! | `iid_sum` | `base` (`rademacher` or `bernoulli`), `p` (0.5), `n` |
//! | `spin_total` | `dim` (1), `side`, `beta`, `h`, `j` (1), `measure` (`ising`), `atoms`, `periodic` (false) |
//! | `dpp_linstat` | `kernel` (`gaussian`), `dim` (1), `amplitude`, `length` (1), `rank`, `alpha`, `phi` (`bump`), `L`, `grid_res` |
//!
//! Spin measures are `ising`, `atomic`, `xy` (circle) and `heisenberg`
//! (sphere); atomic measures list atoms as `atoms=x@w;x@w;...`.

use std::collections::BTreeMap;

use crate::charfn::{CharFnModel, IidBase};
use crate::dpp::{default_resolution, fredholm_charfn_model, DiscretizedKernel, KernelSpec, TestFunction};
use crate::error::{Error, Result};
use crate::numeric::Complex64;
use crate::spin::{total_spin_model, Lattice, SpinMeasure, SpinModel};

/// Names accepted by [`model_from_name`].
pub const MODEL_NAMES: [&str; 7] = [
    "gaussian",
    "rademacher",
    "binomial",
    "poisson_centered",
    "iid_sum",
    "spin_total",
    "dpp_linstat",
];

/// Parsed `key=value` parameters of a model string.
struct Params<'a> {
    model: &'a str,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn parse(model: &'a str, text: &'a str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("{model}: expected key=value, got {item:?}")))?;
            if values.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::Argument(format!("{model}: {} given more than once", k.trim())));
            }
        }
        Ok(Params { model, values })
    }

    fn allow(&self, keys: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self.values.keys().copied().filter(|k| !keys.contains(k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "{}: unknown parameter(s) {}; accepted: {}",
                self.model,
                unknown.join(", "),
                keys.join(", ")
            )))
        }
    }

    fn text(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).copied()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.text(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Argument(format!("{}: cannot parse {key} = {v:?}", self.model)))
            })
            .transpose()
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Argument(format!("{}: missing required parameter {key}", self.model)))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

/// Spin measure by name: `ising`, `atomic` (with `atoms`), `xy` or `circle`,
/// `heisenberg` or `sphere`.
pub fn spin_measure_from_name(name: &str, atoms: Option<&str>) -> Result<SpinMeasure> {
    let measure = match name {
        "ising" => SpinMeasure::Ising,
        "xy" | "circle" => SpinMeasure::Circle,
        "heisenberg" | "sphere" => SpinMeasure::Sphere,
        "atomic" => {
            let text = atoms.ok_or_else(|| Error::Argument("atomic measure needs atoms (x@w;x@w;...)".into()))?;
            let atoms = text
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|a| {
                    let (x, w) = a
                        .split_once('@')
                        .ok_or_else(|| Error::Argument(format!("atom {a:?} is not of the form x@w")))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Argument(format!("cannot parse atom {a:?}")))
                    };
                    Ok((parse(x)?, parse(w)?))
                })
                .collect::<Result<Vec<_>>>()?;
            SpinMeasure::Atomic { atoms }
        }
        other => {
            return Err(Error::Argument(format!(
                "unknown spin measure {other:?}; expected ising, atomic, xy or heisenberg"
            )))
        }
    };
    measure.validate()?;
    Ok(measure)
}

/// Couplings of a translation-invariant model with nearest-neighbour
/// strength `j`: only the first component couples for scalar measures.
pub fn isotropic_coupling(measure: &SpinMeasure, j: f64) -> [f64; 3] {
    match measure.components() {
        1 => [j, 0.0, 0.0],
        2 => [j, j, 0.0],
        _ => [j, j, j],
    }
}

/// Kernel by `family` name with the given parameters.
pub fn kernel_from_name(
    family: &str,
    dim: usize,
    amplitude: Option<f64>,
    length: f64,
    rank: Option<usize>,
    alpha: f64,
) -> Result<KernelSpec> {
    match family {
        "gaussian" => KernelSpec::gaussian(dim, amplitude.unwrap_or(1.0), length, alpha),
        "ball_fourier" => match amplitude {
            Some(a) => KernelSpec::ball_fourier_scaled(dim, a, alpha),
            None => KernelSpec::ball_fourier(dim, alpha),
        },
        "projection" => KernelSpec::projection(
            dim,
            rank.ok_or_else(|| Error::Argument("projection kernel needs a rank".into()))?,
            alpha,
        ),
        other => Err(Error::Argument(format!(
            "unknown kernel {other:?}; expected gaussian, ball_fourier or projection"
        ))),
    }
}

/// Test function by name: `indicator`, `bump` or `constant`.
pub fn test_function_from_name(name: &str) -> Result<TestFunction> {
    match name {
        "indicator" => Ok(TestFunction::Indicator),
        "bump" => Ok(TestFunction::Bump),
        "constant" => Ok(TestFunction::Constant),
        other => Err(Error::Argument(format!(
            "unknown test function {other:?}; expected indicator, bump or constant"
        ))),
    }
}

/// Builds the model described by `spec`; see the module documentation for
/// the accepted names and parameters.
pub fn model_from_name(spec: &str) -> Result<CharFnModel> {
    let spec = spec.trim();
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let p = Params::parse(name, rest)?;
    match name {
        "gaussian" => {
            p.allow(&["mean", "sd"])?;
            let sd: f64 = p.or("sd", 1.0)?;
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::Argument(format!("gaussian: sd must be finite and nonnegative, got {sd}")));
            }
            Ok(CharFnModel::gaussian(p.or("mean", 0.0)?, sd))
        }
        "rademacher" => {
            p.allow(&[])?;
            Ok(CharFnModel::rademacher())
        }
        "binomial" => {
            p.allow(&["n", "p"])?;
            let prob: f64 = p.required("p")?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(Error::Argument(format!("binomial: p must lie in [0, 1], got {prob}")));
            }
            Ok(CharFnModel::binomial(p.required("n")?, prob))
        }
        "poisson_centered" => {
            p.allow(&["lambda"])?;
            let lambda: f64 = p.required("lambda")?;
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Argument(format!("poisson_centered: lambda must be positive, got {lambda}")));
            }
            Ok(CharFnModel::poisson_centered(lambda))
        }
        "iid_sum" => {
            p.allow(&["base", "p", "n"])?;
            let base = match p.text("base").unwrap_or("rademacher") {
                "rademacher" => IidBase::Rademacher,
                "bernoulli" => {
                    let prob: f64 = p.or("p", 0.5)?;
                    if !(prob > 0.0 && prob < 1.0) {
                        return Err(Error::Argument(format!("iid_sum: p must lie in (0, 1), got {prob}")));
                    }
                    IidBase::Bernoulli { p: prob }
                }
                other => {
                    return Err(Error::Argument(format!(
                        "iid_sum: unknown base {other:?}; expected rademacher or bernoulli"
                    )))
                }
            };
            let n: u32 = p.required("n")?;
            if n == 0 {
                return Err(Error::Argument("iid_sum: n must be at least 1".into()));
            }
            Ok(base.model().iid_sum(n))
        }
        "spin_total" => {
            p.allow(&["dim", "side", "beta", "h", "j", "measure", "atoms", "periodic"])?;
            let measure = spin_measure_from_name(p.text("measure").unwrap_or("ising"), p.text("atoms"))?;
            let coupling = isotropic_coupling(&measure, p.or("j", 1.0)?);
            let h: f64 = p.required("h")?;
            let lattice = Lattice::new(p.or("dim", 1)?, p.required("side")?, p.or("periodic", false)?)?;
            let field = [Complex64::new(h, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
            let model = SpinModel::new(lattice, measure, coupling, field, p.required("beta")?)?;
            total_spin_model(&model)
        }
        "dpp_linstat" => {
            p.allow(&["kernel", "dim", "amplitude", "length", "rank", "alpha", "phi", "L", "grid_res"])?;
            let spec = kernel_from_name(
                p.text("kernel").unwrap_or("gaussian"),
                p.or("dim", 1)?,
                p.parsed("amplitude")?,
                p.or("length", 1.0)?,
                p.parsed("rank")?,
                p.required("alpha")?,
            )?;
            let phi = test_function_from_name(p.text("phi").unwrap_or("bump"))?;
            let l: f64 = p.required("L")?;
            let h = p.or("grid_res", default_resolution(&spec))?;
            let dk = DiscretizedKernel::for_statistic(&spec, &phi, l, h)?;
            let values = dk.sample_function(&phi, l);
            fredholm_charfn_model(&dk, &values, spec.alpha)
        }
        other => Err(Error::Argument(format!(
            "unknown model {other:?}; expected one of {}",
            MODEL_NAMES.join(", ")
        ))),
    }
}
