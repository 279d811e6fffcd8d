use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bessel::bessel_j;
use crate::numeric::linalg::sym_eigen;
use crate::numeric::rng::stream_rng;

/// Tolerance on the spectral condition `Spec(M) ⊂ [0, 1/|α|]`.
pub const SPECTRAL_TOL: f64 = 1e-8;

/// Axis-aligned box split into equal cells; points are cell midpoints,
/// enumerated with the first axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != cells.len() {
            return Err(Error::Argument("grid bounds and cell counts must share one dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Argument("grid needs finite bounds with lower < upper".into()));
        }
        if cells.contains(&0) {
            return Err(Error::Argument("grid needs at least one cell per axis".into()));
        }
        Ok(Grid { lower, upper, cells })
    }

    /// The cube `[−half, half]^d` with cells of side at most `h`.
    pub fn centered_cube(dim: usize, half: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Argument(format!("grid resolution must be positive, got {h}")));
        }
        let n = ((2.0 * half / h).round() as usize).max(1);
        Grid::new(vec![-half; dim], vec![half; dim], vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Integer coordinates of point `i`.
    pub fn index(&self, mut i: usize) -> Vec<usize> {
        self.cells
            .iter()
            .map(|&c| {
                let k = i % c;
                i /= c;
                k
            })
            .collect()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.index(i)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.lower[a] + (k as f64 + 0.5) * self.spacing(a))
            .collect()
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..self.dim() {
            if x[a] < self.lower[a] || x[a] > self.upper[a] {
                return None;
            }
            let k = (((x[a] - self.lower[a]) / self.spacing(a)) as usize).min(self.cells[a] - 1);
            idx += k * stride;
            stride *= self.cells[a];
        }
        Some(idx)
    }

    /// Same box with every cell count doubled (`refine = true`) or halved.
    pub fn rescaled(&self, refine: bool) -> Grid {
        let cells = self
            .cells
            .iter()
            .map(|&c| if refine { 2 * c } else { (c / 2).max(1) })
            .collect();
        Grid { cells, ..self.clone() }
    }
}

/// Values on the cells of a grid, piecewise constant in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Kernel values between all pairs of cell midpoints of a grid, piecewise
/// constant in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedKernel {
    pub grid: Grid,
    /// Row-major `len × len` matrix.
    pub values: Vec<f64>,
}

/// Reads the `key = value` header (`dim`, `lower`, `upper`, `cells`) and the
/// whitespace-separated numeric body shared by the tabulated formats.
fn parse_tabulated(text: &str) -> Result<(Grid, Vec<f64>)> {
    let mut dim = None;
    let mut lower = None;
    let mut upper = None;
    let mut cells = None;
    let mut body = Vec::new();
    let list = |v: &str, line: usize| -> Result<Vec<f64>> {
        v.split([',', ' '])
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("not a number: {s}"),
                })
            })
            .collect()
    };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some((k, v)) = content.split_once('=') {
            let v = v.trim();
            match k.trim() {
                "dim" => {
                    dim = Some(v.parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("dim must be a positive integer, got {v}"),
                    })?)
                }
                "lower" => lower = Some(list(v, line)?),
                "upper" => upper = Some(list(v, line)?),
                "cells" => cells = Some(list(v, line)?.iter().map(|&c| c as usize).collect::<Vec<_>>()),
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown header key {other}"),
                    })
                }
            }
        } else {
            body.extend(list(content, line)?);
        }
    }
    let missing = |k: &str| Error::Parse {
        line: 0,
        msg: format!("missing header key {k}"),
    };
    let dim = dim.ok_or_else(|| missing("dim"))?;
    let widen = |v: Vec<f64>| if v.len() == 1 { vec![v[0]; dim] } else { v };
    let lower = widen(lower.ok_or_else(|| missing("lower"))?);
    let upper = widen(upper.ok_or_else(|| missing("upper"))?);
    let cells: Vec<usize> = cells.ok_or_else(|| missing("cells"))?;
    let cells = if cells.len() == 1 { vec![cells[0]; dim] } else { cells };
    if lower.len() != dim || upper.len() != dim || cells.len() != dim {
        return Err(Error::Parse {
            line: 0,
            msg: format!("grid header entries must have {dim} components"),
        });
    }
    Ok((Grid::new(lower, upper, cells)?, body))
}

impl TabulatedFunction {
    /// Header `dim`, `lower`, `upper`, `cells`; body: one value per cell in
    /// grid order.
    pub fn parse(text: &str) -> Result<Self> {
        let (grid, values) = parse_tabulated(text)?;
        if values.len() != grid.len() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {} values, found {}", grid.len(), values.len()),
            });
        }
        Ok(TabulatedFunction { grid, values })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Zero outside the grid.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.grid.locate(x).map_or(0.0, |i| self.values[i])
    }
}

impl TabulatedKernel {
    /// Header as for [`TabulatedFunction`]; body: the kernel matrix, one
    /// row per line.
    pub fn parse(text: &str) -> Result<Self> {
        let (grid, values) = parse_tabulated(text)?;
        let m = grid.len();
        if values.len() != m * m {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected a {m}×{m} matrix, found {} values", values.len()),
            });
        }
        Ok(TabulatedKernel { grid, values })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match (self.grid.locate(x), self.grid.locate(y)) {
            (Some(i), Some(j)) => self.values[i * self.grid.len() + j],
            _ => 0.0,
        }
    }
}

/// Kernel given by a closure; not serializable.
#[derive(Clone)]
pub struct CustomKernel(pub Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>);

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomKernel")
    }
}

impl PartialEq for CustomKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// Built-in kernel families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `a·exp(−‖x−y‖²/ℓ²)`.
    Gaussian { amplitude: f64, length: f64 },
    /// `a·(2π)^{d/2} ‖x−y‖^{−d/2} J_{d/2}(‖x−y‖)`, the Fourier transform of
    /// the unit-ball indicator. `a = (2π)^{−d}` makes it a projection.
    BallFourier { amplitude: f64 },
    /// Rank-`r` projection onto the first tensor-product cosine modes on
    /// `[0, 1]^d`; zero outside the unit box.
    Projection { rank: usize },
    Tabulated(TabulatedKernel),
    #[serde(skip)]
    Custom(CustomKernel),
}

/// Reference density `f` of the background measure `dμ = f dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Constant { value: f64 },
    /// `base·(1 + amplitude·cos(2π x₁ / period))`, with `|amplitude| < 1`.
    Modulated { base: f64, amplitude: f64, period: f64 },
}

impl Density {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Modulated { base, amplitude, period } => {
                base * (1.0 + amplitude * (2.0 * PI * x[0] / period).cos())
            }
        }
    }

    /// `(c₁, c₂)` with `c₁ ≤ f ≤ c₂`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Density::Constant { value } => (value, value),
            Density::Modulated { base, amplitude, .. } => {
                (base * (1.0 - amplitude.abs()), base * (1.0 + amplitude.abs()))
            }
        }
    }
}

/// An α-determinantal process: kernel, background density and `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dim: usize,
    pub family: KernelFamily,
    pub density: Density,
    pub alpha: f64,
    /// Polynomial decay exponent of the kernel, when it has one.
    pub decay_beta: Option<f64>,
}

/// Tensor-product cosine mode indices, ordered by total degree and then
/// lexicographically.
fn projection_modes(dim: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(rank);
    let mut total = 0;
    while out.len() < rank {
        let mut level = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            if idx.iter().sum::<usize>() == total {
                level.push(idx.clone());
            }
            let mut a = 0;
            while a < dim {
                idx[a] += 1;
                if idx[a] <= total {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == dim {
                break;
            }
        }
        level.sort();
        out.extend(level.into_iter().take(rank - out.len()));
        total += 1;
    }
    out
}

fn cosine_mode(k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * (PI * k as f64 * x).cos()
    }
}

impl KernelSpec {
    pub fn new(dim: usize, family: KernelFamily, density: Density, alpha: f64) -> Result<Self> {
        let spec = KernelSpec {
            dim,
            family,
            density,
            alpha,
            decay_beta: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `a·exp(−‖x−y‖²/ℓ²)` against Lebesgue measure.
    pub fn gaussian(dim: usize, amplitude: f64, length: f64, alpha: f64) -> Result<Self> {
        Self::new(dim, KernelFamily::Gaussian { amplitude, length }, Density::Constant { value: 1.0 }, alpha)
    }

    /// The ball-Fourier projection kernel (`a = (2π)^{−d}`), decay exponent
    /// `(d+1)/2`.
    pub fn ball_fourier(dim: usize, alpha: f64) -> Result<Self> {
        Self::ball_fourier_scaled(dim, (2.0 * PI).powi(-(dim as i32)), alpha)
    }

    pub fn ball_fourier_scaled(dim: usize, amplitude: f64, alpha: f64) -> Result<Self> {
        let mut spec = Self::new(
            dim,
            KernelFamily::BallFourier { amplitude },
            Density::Constant { value: 1.0 },
            alpha,
        )?;
        spec.decay_beta = Some((dim as f64 + 1.0) / 2.0);
        Ok(spec)
    }

    pub fn projection(dim: usize, rank: usize, alpha: f64) -> Result<Self> {
        Self::new(dim, KernelFamily::Projection { rank }, Density::Constant { value: 1.0 }, alpha)
    }

    pub fn with_density(mut self, density: Density) -> Result<Self> {
        self.density = density;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_decay_beta(mut self, beta: f64) -> Self {
        self.decay_beta = Some(beta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Argument("α must be finite".into()));
        }
        let (c1, c2) = self.density.bounds();
        if !(c1 > 0.0) || !c2.is_finite() {
            return Err(Error::Argument("density must be bounded between positive constants".into()));
        }
        match &self.family {
            KernelFamily::Gaussian { amplitude, length } => {
                if !(*amplitude >= 0.0) || !(*length > 0.0) {
                    return Err(Error::Argument("Gaussian kernel needs amplitude ≥ 0 and length > 0".into()));
                }
            }
            KernelFamily::BallFourier { amplitude } => {
                if !(*amplitude >= 0.0) {
                    return Err(Error::Argument("ball-Fourier amplitude must be nonnegative".into()));
                }
            }
            KernelFamily::Projection { rank } => {
                if *rank == 0 {
                    return Err(Error::Argument("projection rank must be positive".into()));
                }
            }
            KernelFamily::Tabulated(t) => {
                if t.grid.dim() != self.dim {
                    return Err(Error::Argument("tabulated kernel dimension differs from the spec".into()));
                }
            }
            KernelFamily::Custom(_) => {}
        }
        Ok(())
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { amplitude, length } => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                amplitude * (-r2 / (length * length)).exp()
            }
            KernelFamily::BallFourier { amplitude } => {
                let r = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                amplitude * ball_fourier_profile(self.dim, r)
            }
            KernelFamily::Projection { rank } => {
                if x.iter().chain(y).any(|&v| !(0.0..=1.0).contains(&v)) {
                    return 0.0;
                }
                projection_modes(self.dim, *rank)
                    .iter()
                    .map(|k| {
                        k.iter()
                            .enumerate()
                            .map(|(a, &ka)| cosine_mode(ka, x[a]) * cosine_mode(ka, y[a]))
                            .product::<f64>()
                    })
                    .sum()
            }
            KernelFamily::Tabulated(t) => t.eval(x, y),
            KernelFamily::Custom(c) => (c.0)(x, y),
        }
    }

    /// `K` as a function of `x − y`, for translation-invariant families.
    pub fn difference_profile(&self) -> Option<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
        match self.family {
            KernelFamily::Gaussian { amplitude, length } => Some(Box::new(move |z: &[f64]| {
                amplitude * (-z.iter().map(|v| v * v).sum::<f64>() / (length * length)).exp()
            })),
            KernelFamily::BallFourier { amplitude } => {
                let d = self.dim;
                Some(Box::new(move |z: &[f64]| {
                    amplitude * ball_fourier_profile(d, z.iter().map(|v| v * v).sum::<f64>().sqrt())
                }))
            }
            _ => None,
        }
    }

    /// Box outside which the kernel vanishes, when there is one.
    pub fn support(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.family {
            KernelFamily::Projection { .. } => Some((vec![0.0; self.dim], vec![1.0; self.dim])),
            KernelFamily::Tabulated(t) => Some((t.grid.lower.clone(), t.grid.upper.clone())),
            _ => None,
        }
    }

    /// Length scale over which the kernel varies; sets default resolutions.
    pub fn correlation_length(&self) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { length, .. } => *length,
            KernelFamily::BallFourier { .. } => 2.0,
            KernelFamily::Projection { .. } => 1.0,
            KernelFamily::Tabulated(t) => (0..t.grid.dim()).map(|a| t.grid.spacing(a)).fold(0.0, f64::max),
            KernelFamily::Custom(_) => 1.0,
        }
    }

    /// Random checks of `K(x,y) = K(y,x)` and `K(x,x) ≥ 0` on `pairs` points
    /// drawn from `[−extent, extent]^d`; returns the largest asymmetry.
    pub fn check_symmetry(&self, pairs: usize, extent: f64, seed: u64) -> Result<f64> {
        let mut rng = stream_rng(seed, 0);
        let (lo, hi) = self
            .support()
            .unwrap_or((vec![-extent; self.dim], vec![extent; self.dim]));
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..self.dim).map(|a| rng.random_range(lo[a]..=hi[a])).collect();
            let y: Vec<f64> = (0..self.dim).map(|a| rng.random_range(lo[a]..=hi[a])).collect();
            let (kxy, kyx) = (self.eval(&x, &y), self.eval(&y, &x));
            worst = worst.max((kxy - kyx).abs());
            if self.eval(&x, &x) < 0.0 {
                return Err(Error::Argument(format!("K(x,x) < 0 at {x:?}")));
            }
        }
        if worst > 1e-12 * (1.0 + self.eval(&lo, &lo).abs()) {
            return Err(Error::Argument(format!("kernel is not symmetric (gap {worst:e})")));
        }
        Ok(worst)
    }
}

/// `(2π)^{d/2} r^{−d/2} J_{d/2}(r)`, with value `Vol(B_1) = π^{d/2}/Γ(d/2+1)`
/// at the origin.
pub fn ball_fourier_profile(dim: usize, r: f64) -> f64 {
    let nu = dim as f64 / 2.0;
    if r < 1e-6 {
        // J_ν(r) ≈ (r/2)^ν/Γ(ν+1) (1 − r²/(4(ν+1)))
        return PI.powf(nu) / libm::tgamma(nu + 1.0) * (1.0 - r * r / (4.0 * (nu + 1.0)));
    }
    (2.0 * PI).powf(nu) * r.powf(-nu) * bessel_j(nu, r)
}

/// Test functions `φ`; the statistic at scale `L` uses `φ(x/L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// Indicator of the cube `[−1, 1]^d`.
    Indicator,
    /// `exp(1 − 1/(1 − ‖x‖²))` on the unit ball.
    Bump,
    /// `φ ≡ 1`.
    Constant,
    Tabulated(TabulatedFunction),
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Indicator => {
                if x.iter().all(|v| v.abs() <= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Bump => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if r2 < 1.0 {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
            TestFunction::Constant => 1.0,
            TestFunction::Tabulated(t) => t.eval(x),
        }
    }

    /// `φ(x/L)`.
    pub fn eval_scaled(&self, x: &[f64], scale: f64) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
        self.eval(&y)
    }

    /// Half-width of a centred cube containing the support, if bounded.
    pub fn support_half_width(&self) -> Option<f64> {
        match self {
            TestFunction::Indicator | TestFunction::Bump => Some(1.0),
            TestFunction::Constant => None,
            TestFunction::Tabulated(t) => Some(
                t.grid
                    .lower
                    .iter()
                    .chain(&t.grid.upper)
                    .map(|v| v.abs())
                    .fold(0.0, f64::max),
            ),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::Tabulated(t) => t.values.iter().map(|v| v.abs()).fold(0.0, f64::max),
            _ => 1.0,
        }
    }
}

/// Grid for `φ(·/L)`: the cube covering its support, intersected with the
/// kernel's support box, with cells of side at most `resolution`.
pub fn window_grid(spec: &KernelSpec, phi: &TestFunction, scale: f64, resolution: f64) -> Result<Grid> {
    if !(scale > 0.0) || !(resolution > 0.0) {
        return Err(Error::Argument("scale and resolution must be positive".into()));
    }
    let half = phi.support_half_width().map(|w| w * scale);
    let (mut lo, mut hi) = match half {
        Some(h) => (vec![-h; spec.dim], vec![h; spec.dim]),
        None => (vec![f64::NEG_INFINITY; spec.dim], vec![f64::INFINITY; spec.dim]),
    };
    if let Some((klo, khi)) = spec.support() {
        for a in 0..spec.dim {
            lo[a] = lo[a].max(klo[a]);
            hi[a] = hi[a].min(khi[a]);
        }
    }
    if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
        return Err(Error::Argument("neither the test function nor the kernel has bounded support".into()));
    }
    let cells = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (((b - a) / resolution).ceil() as usize).max(1))
        .collect();
    Grid::new(lo, hi, cells)
}

/// Finite-rank stand-in for the kernel operator on `L²(μ)`: midpoint
/// quadrature with weights `w_i = f(x_i)·vol` and the symmetric matrix
/// `M_ij = √w_i K(x_i, x_j) √w_j`.
#[derive(Debug)]
pub struct DiscretizedKernel {
    pub dim: usize,
    pub alpha: f64,
    /// Flat list of points, stride `dim`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub matrix: DMatrix<f64>,
    eigen: OnceLock<(Vec<f64>, DMatrix<f64>)>,
    factor: OnceLock<DMatrix<f64>>,
}

impl Clone for DiscretizedKernel {
    fn clone(&self) -> Self {
        DiscretizedKernel {
            dim: self.dim,
            alpha: self.alpha,
            points: self.points.clone(),
            weights: self.weights.clone(),
            matrix: self.matrix.clone(),
            eigen: self.eigen.clone(),
            factor: self.factor.clone(),
        }
    }
}

/// Largest number of grid points for which the dense matrix is built.
pub const MAX_DISCRETIZATION_POINTS: usize = 8192;

impl DiscretizedKernel {
    /// Discretizes the spec on the midpoints of `grid`, keeping only points
    /// where `keep` holds. For `α < 0` the spectrum must lie in
    /// `[−tol, 1/|α| + tol]`.
    pub fn build(spec: &KernelSpec, grid: &Grid, keep: impl Fn(&[f64]) -> bool) -> Result<Self> {
        spec.validate()?;
        if grid.dim() != spec.dim {
            return Err(Error::Argument("grid dimension differs from the kernel".into()));
        }
        let vol = grid.cell_volume();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..grid.len() {
            let x = grid.point(i);
            if keep(&x) {
                weights.push(spec.density.eval(&x) * vol);
                points.extend(x);
            }
        }
        let m = weights.len();
        if m > MAX_DISCRETIZATION_POINTS {
            return Err(Error::Capability(format!(
                "{m} grid points exceed the dense limit {MAX_DISCRETIZATION_POINTS}; coarsen the grid"
            )));
        }
        let d = spec.dim;
        let mut matrix = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let k = spec.eval(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]);
                let v = weights[i].sqrt() * k * weights[j].sqrt();
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Self::from_parts(d, spec.alpha, points, weights, matrix)
    }

    /// The spec on every point of `grid`.
    pub fn on_grid(spec: &KernelSpec, grid: &Grid) -> Result<Self> {
        Self::build(spec, grid, |_| true)
    }

    /// The spec on the window of `φ(·/L)`, dropping points where `φ_L = 0`
    /// (they do not affect the statistic).
    pub fn for_statistic(spec: &KernelSpec, phi: &TestFunction, scale: f64, resolution: f64) -> Result<Self> {
        let grid = window_grid(spec, phi, scale, resolution)?;
        Self::build(spec, &grid, |x| phi.eval_scaled(x, scale) != 0.0)
    }

    /// A discretization given directly by its weighted matrix.
    pub fn from_matrix(matrix: DMatrix<f64>, alpha: f64) -> Result<Self> {
        let m = matrix.nrows();
        if matrix.ncols() != m {
            return Err(Error::Argument("kernel matrix must be square".into()));
        }
        let points = (0..m).map(|i| i as f64).collect();
        Self::from_parts(1, alpha, points, vec![1.0; m], matrix)
    }

    fn from_parts(dim: usize, alpha: f64, points: Vec<f64>, weights: Vec<f64>, matrix: DMatrix<f64>) -> Result<Self> {
        let m = weights.len();
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(Error::Argument(format!("kernel matrix is not symmetric at ({i}, {j})")));
                }
            }
            if matrix[(i, i)] < 0.0 {
                return Err(Error::Argument(format!("negative diagonal entry at {i}")));
            }
        }
        let dk = DiscretizedKernel {
            dim,
            alpha,
            points,
            weights,
            matrix,
            eigen: OnceLock::new(),
            factor: OnceLock::new(),
        };
        if alpha < 0.0 && m > 0 {
            let top = 1.0 / alpha.abs();
            let ev = dk.eigenvalues();
            let (lo, hi) = (ev[0], ev[m - 1]);
            if lo < -SPECTRAL_TOL || hi > top + SPECTRAL_TOL {
                return Err(Error::Domain(format!(
                    "spectrum [{lo}, {hi}] of the discretized kernel leaves [0, {top}] required for α = {alpha}"
                )));
            }
        }
        Ok(dk)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// `K(x_i, x_i)`.
    pub fn kernel_diagonal(&self, i: usize) -> f64 {
        self.matrix[(i, i)] / self.weights[i]
    }

    /// `tr M = Σ w_i K(x_i, x_i)`.
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Eigen-decomposition of `M`, ascending, computed once.
    pub fn eigen(&self) -> &(Vec<f64>, DMatrix<f64>) {
        self.eigen.get_or_init(|| sym_eigen(&self.matrix))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen().0
    }

    /// `B = V_r Λ_r^{1/2}` over the eigenvalues above `1e-14·‖M‖`, so that
    /// `M ≈ B Bᵀ` and `G M` shares its nonzero spectrum with `Bᵀ G B`.
    pub fn factor(&self) -> &DMatrix<f64> {
        self.factor.get_or_init(|| {
            let (values, vectors) = self.eigen();
            let cut = 1e-14 * self.operator_norm().max(f64::MIN_POSITIVE);
            let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > cut).collect();
            DMatrix::from_fn(self.len(), keep.len(), |i, c| vectors[(i, keep[c])] * values[keep[c]].sqrt())
        })
    }

    /// Largest eigenvalue of `M` (its operator norm, as `M` is PSD).
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `φ(x_i/L)` at every point.
    pub fn sample_function(&self, phi: &TestFunction, scale: f64) -> Vec<f64> {
        (0..self.len()).map(|i| phi.eval_scaled(self.point(i), scale)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_points_and_location() {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![2, 4]).unwrap();
        assert_eq!(g.len(), 8);
        assert_abs_diff_eq!(g.cell_volume(), 0.25, epsilon = 1e-15);
        assert_eq!(g.point(1), vec![0.75, -0.75]);
        assert_eq!(g.point(2), vec![0.25, -0.25]);
        for i in 0..8 {
            assert_eq!(g.locate(&g.point(i)), Some(i));
        }
        assert_eq!(g.locate(&[2.0, 0.0]), None);
    }

    #[test]
    fn projection_is_exact_on_midpoint_grid() {
        for (dim, rank, cells) in [(1, 1, 5), (1, 3, 8), (2, 4, 6)] {
            let spec = KernelSpec::projection(dim, rank, -1.0).unwrap();
            let grid = Grid::new(vec![0.0; dim], vec![1.0; dim], vec![cells; dim]).unwrap();
            let dk = DiscretizedKernel::on_grid(&spec, &grid).unwrap();
            let ev = dk.eigenvalues();
            let ones = ev.iter().filter(|v| (*v - 1.0).abs() < 1e-12).count();
            let zeros = ev.iter().filter(|v| v.abs() < 1e-12).count();
            assert_eq!(ones, rank);
            assert_eq!(ones + zeros, ev.len());
            assert_abs_diff_eq!(dk.trace(), rank as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn ball_fourier_profile_values() {
        // d = 2: 2π J₁(r)/r, value π at the origin
        assert_abs_diff_eq!(ball_fourier_profile(2, 0.0), PI, epsilon = 1e-14);
        let r = 3.7;
        assert_abs_diff_eq!(ball_fourier_profile(2, r), 2.0 * PI * libm::j1(r) / r, epsilon = 1e-13);
        // d = 3: 4π (sin r − r cos r)/r³
        let exact = 4.0 * PI * (r.sin() - r * r.cos()) / r.powi(3);
        assert_abs_diff_eq!(ball_fourier_profile(3, r), exact, epsilon = 1e-12);
        assert_abs_diff_eq!(ball_fourier_profile(3, 1e-7), 4.0 * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn alpha_negative_spectral_condition() {
        // a = 1/(2√π), ℓ = 1: symbol maximum 1/2, admissible for α = −1 and −2
        let spec = KernelSpec::gaussian(1, 0.5 / PI.sqrt(), 1.0, -1.0).unwrap();
        let grid = Grid::centered_cube(1, 8.0, 0.25).unwrap();
        assert!(DiscretizedKernel::on_grid(&spec, &grid).is_ok());
        let strong = spec.clone().with_alpha(-4.0).unwrap();
        assert!(matches!(DiscretizedKernel::on_grid(&strong, &grid), Err(Error::Domain(_))));
    }

    #[test]
    fn tabulated_round_trip() {
        let text = "# two cells\ndim = 1\nlower = 0\nupper = 2\ncells = 2\n0.5 0.1\n0.1 0.5\n";
        let k = TabulatedKernel::parse(text).unwrap();
        assert_eq!(k.eval(&[0.2], &[1.7]), 0.1);
        assert_eq!(k.eval(&[0.2], &[2.7]), 0.0);
        let spec = KernelSpec::new(1, KernelFamily::Tabulated(k.clone()), Density::Constant { value: 1.0 }, -1.0).unwrap();
        let dk = DiscretizedKernel::on_grid(&spec, &k.grid).unwrap();
        assert_abs_diff_eq!(dk.matrix[(0, 1)], 0.1, epsilon = 1e-15);
        assert!(TabulatedKernel::parse("dim = 1\nlower = 0\nupper = 1\ncells = 2\n1 2 3\n").is_err());
        assert!(matches!(TabulatedKernel::parse("dim = 1\n1\n"), Err(Error::Parse { .. })));
        let f = TabulatedFunction::parse("dim = 2\nlower = -1\nupper = 1\ncells = 1, 2\n3\n4\n").unwrap();
        assert_eq!(f.eval(&[0.0, 0.5]), 4.0);
    }

    #[test]
    fn symmetry_checks() {
        let spec = KernelSpec::ball_fourier(2, -1.0).unwrap();
        assert!(spec.check_symmetry(200, 10.0, 1).unwrap() < 1e-15);
        let skew = KernelSpec::new(
            1,
            KernelFamily::Custom(CustomKernel(Arc::new(|x: &[f64], y: &[f64]| (-(x[0] - 2.0 * y[0]).powi(2)).exp()))),
            Density::Constant { value: 1.0 },
            0.0,
        )
        .unwrap();
        assert!(skew.check_symmetry(200, 2.0, 1).is_err());
    }

    #[test]
    fn window_restricts_to_support() {
        let spec = KernelSpec::gaussian(2, 1.0, 1.0, 1.0).unwrap();
        let dk = DiscretizedKernel::for_statistic(&spec, &TestFunction::Bump, 2.0, 0.5).unwrap();
        // bump support is the open disk of radius 2: 64 cells, 52 strictly inside
        assert!(dk.len() < 64 && dk.len() > 40);
        let phi = dk.sample_function(&TestFunction::Bump, 2.0);
        assert!(phi.iter().all(|&v| v > 0.0));
    }
}
