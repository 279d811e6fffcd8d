//! Exact partition functions and total-spin characteristic functions.
//!
//! Two backends: full enumeration for discrete spin measures on at most 20
//! sites, and transfer matrices along paths and cycles (1D chains and the
//! 2×2 square), which also cover the circle and sphere quadratures.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{hamiltonian, Lattice, SpinModel, SpinNode};
use crate::charfn::CharFnModel;
use crate::error::{Error, Result};
use crate::numeric::Complex64;

/// Largest number of sites for enumeration.
pub const MAX_ENUMERATION_SITES: usize = 20;
/// Largest number of configurations visited by enumeration.
pub const MAX_ENUMERATION_STATES: u64 = 1 << 24;
/// Largest lattice handled with a continuous spin measure.
pub const MAX_QUADRATURE_SITES: usize = 4;

/// Relative agreement required between the quadrature rule and its halved
/// companion.
pub const QUADRATURE_TOL: f64 = 1e-9;

/// The complex number `value · e^{log_scale}`, for partition functions
/// whose magnitude overflows `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplex {
    pub value: Complex64,
    pub log_scale: f64,
}

impl ScaledComplex {
    pub fn to_complex(&self) -> Complex64 {
        self.value * self.log_scale.exp()
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Complex64 {
        self.value.ln() + self.log_scale
    }

    /// `self / other`.
    pub fn ratio(&self, other: &ScaledComplex) -> Complex64 {
        self.value / other.value * (self.log_scale - other.log_scale).exp()
    }

    fn normalized(value: Complex64, log_scale: f64) -> Self {
        let m = value.norm();
        if m > 0.0 && m.is_finite() {
            ScaledComplex {
                value: value / m,
                log_scale: log_scale + m.ln(),
            }
        } else {
            ScaledComplex { value, log_scale }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactBackend {
    Enumeration,
    TransferMatrix,
}

/// Sites visited along a path or cycle covering every edge, when the
/// lattice is one.
pub fn chain_order(lattice: &Lattice) -> Option<(Vec<usize>, bool)> {
    let n = lattice.sites();
    if n == 1 {
        return Some((vec![0], false));
    }
    if lattice.dim == 1 {
        return Some(((0..n).collect(), lattice.periodic && lattice.side > 2));
    }
    if lattice.dim == 2 && lattice.side == 2 {
        return Some((vec![0, 1, 3, 2], true));
    }
    None
}

/// The backend [`ExactSolver`] would use, or why none applies.
pub fn select_backend(model: &SpinModel) -> Result<ExactBackend> {
    let sites = model.sites();
    let chain = chain_order(model.lattice()).is_some();
    if model.measure().is_continuous() {
        if sites <= MAX_QUADRATURE_SITES && chain {
            return Ok(ExactBackend::TransferMatrix);
        }
        return Err(Error::Capability(format!(
            "continuous spins need a path or cycle of at most {MAX_QUADRATURE_SITES} sites; got {sites}"
        )));
    }
    let k = model.measure().nodes(model.quadrature()).len() as f64;
    if sites <= MAX_ENUMERATION_SITES && k.powi(sites as i32) <= MAX_ENUMERATION_STATES as f64 {
        return Ok(ExactBackend::Enumeration);
    }
    if chain {
        return Ok(ExactBackend::TransferMatrix);
    }
    Err(Error::Capability(format!(
        "{sites} discrete sites exceed the enumeration limit and the lattice is not a chain"
    )))
}

/// Total spin `S = Σ σ¹` and summed complex log-weight, grouped by `S`.
#[derive(Debug, Clone)]
struct SpinTable {
    totals: Vec<f64>,
    weights: Vec<Complex64>,
    log_scale: f64,
}

#[derive(Debug, Clone)]
struct TransferLevel {
    nodes: Vec<SpinNode>,
    /// `ln w_a + β h_x·s_a` for each position along the chain.
    site_logs: Vec<Vec<Complex64>>,
    /// Edge factors between consecutive positions (closing edge last for
    /// cycles), each with its subtracted log scale.
    steps: Vec<(Arc<DMatrix<f64>>, f64)>,
    cyclic: bool,
}

#[derive(Debug, Clone)]
enum Engine {
    Table(SpinTable),
    Transfer(Vec<TransferLevel>),
}

/// Prepared exact evaluator of `v ↦ Z(h + (v/β) e₁)` for one model.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    backend: ExactBackend,
    engine: Engine,
    reference: ScaledComplex,
    real_field: bool,
    sites: usize,
}

fn decode(mut state: u64, k: u64, digits: &mut [usize]) {
    for d in digits.iter_mut() {
        *d = (state % k) as usize;
        state /= k;
    }
}

fn build_table(model: &SpinModel) -> Result<SpinTable> {
    let nodes = model.measure().nodes(model.quadrature());
    let k = nodes.len() as u64;
    let sites = model.sites();
    let states = k.pow(sites as u32);
    let beta = model.beta();
    let smax = nodes.iter().map(|n| n.spin[0].abs()).fold(0.0, f64::max);
    let wmax = nodes.iter().map(|n| n.weight).fold(0.0, f64::max);
    // upper bound on the real part of every log-weight
    let log_scale = sites as f64 * wmax.ln()
        + beta
            * (model.couplings().iter().map(|j| j[0].abs()).sum::<f64>() * smax * smax
                + model.field().iter().map(|h| h[0].re.abs()).sum::<f64>() * smax);
    let log_w: Vec<f64> = nodes.iter().map(|n| n.weight.ln()).collect();
    let edges = model.edges().to_vec();
    let couplings: Vec<f64> = model.couplings().iter().map(|j| j[0]).collect();
    let field: Vec<Complex64> = model.field().iter().map(|h| h[0]).collect();

    let chunks = states.min(256);
    let per = states.div_ceil(chunks);
    let partial: Vec<BTreeMap<i64, (f64, Complex64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut map = BTreeMap::new();
            let mut digits = vec![0usize; sites];
            let mut spins = vec![0.0; sites];
            for state in c * per..((c + 1) * per).min(states) {
                decode(state, k, &mut digits);
                let mut lw = 0.0;
                for (x, &d) in digits.iter().enumerate() {
                    spins[x] = nodes[d].spin[0];
                    lw += log_w[d];
                }
                let mut e = 0.0;
                for (i, &(x, y)) in edges.iter().enumerate() {
                    e += couplings[i] * spins[x] * spins[y];
                }
                let mut f = Complex64::new(0.0, 0.0);
                let mut total = 0.0;
                for x in 0..sites {
                    f += field[x] * spins[x];
                    total += spins[x];
                }
                let w = (Complex64::new(lw + beta * e - log_scale, 0.0) + f * beta).exp();
                let key = (total * 1e9).round() as i64;
                let entry = map.entry(key).or_insert((total, Complex64::new(0.0, 0.0)));
                entry.1 += w;
            }
            map
        })
        .collect();
    let mut merged: BTreeMap<i64, (f64, Complex64)> = BTreeMap::new();
    for map in partial {
        for (key, (total, w)) in map {
            merged.entry(key).or_insert((total, Complex64::new(0.0, 0.0))).1 += w;
        }
    }
    Ok(SpinTable {
        totals: merged.values().map(|v| v.0).collect(),
        weights: merged.values().map(|v| v.1).collect(),
        log_scale,
    })
}

fn build_level(model: &SpinModel, nodes: Vec<SpinNode>) -> Result<TransferLevel> {
    let (order, cyclic) = chain_order(model.lattice())
        .ok_or_else(|| Error::Capability("transfer matrices need a path or cycle".into()))?;
    let n = model.components();
    let beta = model.beta();
    let site_logs: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&x| {
            let h = &model.field()[x];
            nodes
                .iter()
                .map(|node| {
                    let mut f = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        f += h[i] * node.spin[i];
                    }
                    f * beta + node.weight.ln()
                })
                .collect()
        })
        .collect();
    let mut cache: HashMap<[u64; 3], (Arc<DMatrix<f64>>, f64)> = HashMap::new();
    let mut steps = Vec::new();
    let k = order.len();
    let pairs: Vec<(usize, usize)> = if k < 2 {
        vec![]
    } else if cyclic {
        (0..k).map(|j| (order[j], order[(j + 1) % k])).collect()
    } else {
        (0..k - 1).map(|j| (order[j], order[j + 1])).collect()
    };
    for (x, y) in pairs {
        let key_edge = (x.min(y), x.max(y));
        let e = model
            .edges()
            .binary_search(&key_edge)
            .map_err(|_| Error::Capability(format!("({x}, {y}) is not an edge of the chain")))?;
        let j = model.couplings()[e];
        let key = [j[0].to_bits(), j[1].to_bits(), j[2].to_bits()];
        let entry = cache.entry(key).or_insert_with(|| {
            let q = nodes.len();
            let mut logs = DMatrix::<f64>::zeros(q, q);
            let mut top = f64::NEG_INFINITY;
            for a in 0..q {
                for b in 0..q {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += j[i] * nodes[a].spin[i] * nodes[b].spin[i];
                    }
                    logs[(a, b)] = beta * s;
                    top = top.max(beta * s);
                }
            }
            (Arc::new(logs.map(|l| (l - top).exp())), top)
        });
        steps.push(entry.clone());
    }
    Ok(TransferLevel {
        nodes,
        site_logs,
        steps,
        cyclic,
    })
}

/// `exp(logs + shift·s¹)` rescaled to unit maximum modulus.
fn site_factor(level: &TransferLevel, pos: usize, shift: Complex64) -> (DVector<f64>, DVector<f64>, f64) {
    let exps: Vec<Complex64> = level.site_logs[pos]
        .iter()
        .zip(&level.nodes)
        .map(|(l, node)| l + shift * node.spin[0])
        .collect();
    let top = exps.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let vals: Vec<Complex64> = exps.iter().map(|e| (e - top).exp()).collect();
    (
        DVector::from_iterator(vals.len(), vals.iter().map(|v| v.re)),
        DVector::from_iterator(vals.len(), vals.iter().map(|v| v.im)),
        top,
    )
}

fn transfer_evaluate(level: &TransferLevel, shift: Complex64) -> ScaledComplex {
    let k = level.site_logs.len();
    let q = level.nodes.len();
    let (d0r, d0i, s0) = site_factor(level, 0, shift);
    let mut log_scale = s0;
    if !level.cyclic {
        let (mut re, mut im) = (d0r, d0i);
        for pos in 1..k {
            let (mat, ms) = &level.steps[pos - 1];
            let (dr, di, ds) = site_factor(level, pos, shift);
            let pr = &**mat * &re;
            let pi = &**mat * &im;
            re = pr.component_mul(&dr) - pi.component_mul(&di);
            im = pr.component_mul(&di) + pi.component_mul(&dr);
            let norm = re.iter().zip(im.iter()).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
            log_scale += ms + ds;
            if norm > 0.0 {
                re /= norm;
                im /= norm;
                log_scale += norm.ln();
            }
        }
        let total = Complex64::new(re.sum(), im.sum());
        return ScaledComplex::normalized(total, log_scale);
    }
    // cycle: trace of Π_j diag(D_j) E_j
    let mut mr = DMatrix::<f64>::identity(q, q);
    let mut mi = DMatrix::<f64>::zeros(q, q);
    for pos in 0..k {
        let (dr, di, ds) = if pos == 0 { (d0r.clone(), d0i.clone(), 0.0) } else { site_factor(level, pos, shift) };
        let (mat, ms) = &level.steps[pos];
        // (mr + i mi)·diag(dr + i di)
        let mut ar = mr.clone();
        let mut ai = mi.clone();
        for c in 0..q {
            for r in 0..q {
                let (x, y) = (mr[(r, c)], mi[(r, c)]);
                ar[(r, c)] = x * dr[c] - y * di[c];
                ai[(r, c)] = x * di[c] + y * dr[c];
            }
        }
        mr = ar * &**mat;
        mi = ai * &**mat;
        log_scale += ms + ds;
        let norm = mr.iter().zip(mi.iter()).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        if norm > 0.0 {
            mr /= norm;
            mi /= norm;
            log_scale += norm.ln();
        }
    }
    ScaledComplex::normalized(Complex64::new(mr.trace(), mi.trace()), log_scale)
}

fn table_evaluate(table: &SpinTable, shift: Complex64) -> ScaledComplex {
    let top = table
        .totals
        .iter()
        .zip(&table.weights)
        .filter(|(_, w)| w.norm() > 0.0)
        .map(|(s, w)| w.norm().ln() + shift.re * s)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return ScaledComplex {
            value: Complex64::new(0.0, 0.0),
            log_scale: table.log_scale,
        };
    }
    let total: Complex64 = table
        .totals
        .iter()
        .zip(&table.weights)
        .map(|(&s, &w)| w * (shift * s - top).exp())
        .sum();
    ScaledComplex::normalized(total, table.log_scale + top)
}

impl ExactSolver {
    pub fn new(model: &SpinModel) -> Result<Self> {
        let backend = select_backend(model)?;
        let engine = match backend {
            ExactBackend::Enumeration => Engine::Table(build_table(model)?),
            ExactBackend::TransferMatrix => {
                let order = model.quadrature();
                let mut levels = vec![build_level(model, model.measure().nodes(order))?];
                if model.measure().is_continuous() {
                    levels.push(build_level(model, model.measure().nodes(&order.halved()))?);
                }
                Engine::Transfer(levels)
            }
        };
        let mut solver = ExactSolver {
            backend,
            engine,
            reference: ScaledComplex {
                value: Complex64::new(1.0, 0.0),
                log_scale: 0.0,
            },
            real_field: model.has_real_field(),
            sites: model.sites(),
        };
        solver.reference = solver.partition_scaled(Complex64::new(0.0, 0.0))?;
        Ok(solver)
    }

    pub fn backend(&self) -> ExactBackend {
        self.backend
    }

    /// `Z(h + (shift/β) e₁)`, i.e. the partition function with `shift·σ_x¹`
    /// added to every site's exponent.
    pub fn partition_scaled(&self, shift: Complex64) -> Result<ScaledComplex> {
        match &self.engine {
            Engine::Table(t) => Ok(table_evaluate(t, shift)),
            Engine::Transfer(levels) => {
                let full = transfer_evaluate(&levels[0], shift);
                if let Some(half) = levels.get(1) {
                    let coarse = transfer_evaluate(half, shift);
                    let gap = (coarse.ratio(&full) - 1.0).norm();
                    if !(gap <= QUADRATURE_TOL) {
                        return Err(Error::numerical(
                            "spin quadrature not converged between halved and full order",
                            gap,
                        ));
                    }
                }
                Ok(full)
            }
        }
    }

    /// `Z(h)`.
    pub fn partition(&self) -> ScaledComplex {
        self.reference
    }

    fn check_reference(&self) -> Result<()> {
        let v = self.reference.value;
        if !(v.norm() > 0.0) || !v.is_finite() {
            return Err(Error::Degenerate("partition function vanishes at the base field".into()));
        }
        Ok(())
    }

    /// `E[e^{vS}] = Z(h + (v/β) e₁) / Z(h)` at complex `v`.
    pub fn total_spin_mgf(&self, v: Complex64) -> Result<Complex64> {
        self.check_reference()?;
        Ok(self.partition_scaled(v)?.ratio(&self.reference))
    }

    /// `log E[e^{vS}]` without overflow (principal branch of the mantissa).
    pub fn total_spin_log_mgf(&self, v: Complex64) -> Result<Complex64> {
        self.check_reference()?;
        let z = self.partition_scaled(v)?;
        Ok((z.value / self.reference.value).ln() + (z.log_scale - self.reference.log_scale))
    }

    /// `Ψ_S(u) = Z(h + (iu/β) e₁) / Z(h)`.
    pub fn total_spin_charfn(&self, u: Complex64) -> Result<Complex64> {
        self.total_spin_mgf(Complex64::i() * u)
    }

    /// Mean and variance of `S` under a real field, from exact group sums
    /// (enumeration) or Richardson-extrapolated differences of `log Z`.
    pub fn total_spin_moments(&self) -> Result<(f64, f64)> {
        if !self.real_field {
            return Err(Error::Precondition("moments need a real field".into()));
        }
        self.check_reference()?;
        match &self.engine {
            Engine::Table(t) => {
                let z: f64 = t.weights.iter().map(|w| w.re).sum();
                let m1: f64 = t.totals.iter().zip(&t.weights).map(|(s, w)| s * w.re).sum::<f64>() / z;
                let m2: f64 = t.totals.iter().zip(&t.weights).map(|(s, w)| s * s * w.re).sum::<f64>() / z;
                Ok((m1, (m2 - m1 * m1).max(0.0)))
            }
            Engine::Transfer(_) => {
                let l = |v: f64| -> Result<f64> { Ok(self.total_spin_log_mgf(Complex64::new(v, 0.0))?.re) };
                // central differences at h, h/2, h/4 with two Richardson levels
                let h = 0.05 / (self.sites as f64).sqrt();
                let mut d1 = [0.0; 3];
                let mut d2 = [0.0; 3];
                for (k, s) in [h, h / 2.0, h / 4.0].into_iter().enumerate() {
                    let (a, b) = (l(s)?, l(-s)?);
                    d1[k] = (a - b) / (2.0 * s);
                    d2[k] = (a + b) / (s * s);
                }
                let extrapolate = |d: [f64; 3]| {
                    let r0 = (4.0 * d[1] - d[0]) / 3.0;
                    let r1 = (4.0 * d[2] - d[1]) / 3.0;
                    (16.0 * r1 - r0) / 15.0
                };
                let mean = extrapolate(d1);
                let var = extrapolate(d2);
                Ok((mean, var.max(0.0)))
            }
        }
    }

}

/// `Z_{β,Λ}(h) = ∫ e^{−βH} Π dμ₀`.
pub fn partition_function(model: &SpinModel) -> Result<Complex64> {
    let z = ExactSolver::new(model)?.partition().to_complex();
    if !z.is_finite() {
        return Err(Error::numerical("partition function overflows; use log_partition_function", f64::INFINITY));
    }
    Ok(z)
}

/// `log Z`, principal branch of the mantissa plus the real scale.
pub fn log_partition_function(model: &SpinModel) -> Result<Complex64> {
    Ok(ExactSolver::new(model)?.partition().ln())
}

/// `Ψ_S(u) = Z(h + (iu/β) e₁)/Z(h)` for the total first spin component.
pub fn total_spin_charfn(model: &SpinModel, u: Complex64) -> Result<Complex64> {
    ExactSolver::new(model)?.total_spin_charfn(u)
}

/// The total first spin component as a [`CharFnModel`] (entire, so the
/// validity radius is unbounded).
pub fn total_spin_model(model: &SpinModel) -> Result<CharFnModel> {
    let solver = Arc::new(ExactSolver::new(model)?);
    let (mean, var) = solver.total_spin_moments()?;
    let s = solver.clone();
    Ok(CharFnModel::from_fn(
        move |v| s.total_spin_mgf(v),
        f64::INFINITY,
        mean,
        var.sqrt(),
        &format!(
            "spin_total({}d side {} {:?} beta={})",
            model.lattice().dim,
            model.lattice().side,
            model.measure(),
            model.beta()
        ),
    ))
}

/// `E[f(σ)]` under the Gibbs measure by visiting every configuration of the
/// (discretized) spin measure and evaluating the Hamiltonian directly.
pub fn direct_gibbs_expectation<F>(model: &SpinModel, f: F) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let nodes = model.measure().nodes(model.quadrature());
    let k = nodes.len() as u64;
    let sites = model.sites();
    let states = (k as f64).powi(sites as i32);
    if states > MAX_ENUMERATION_STATES as f64 * 4.0 {
        return Err(Error::Capability(format!("{states} configurations is too many to visit")));
    }
    let states = states as u64;
    let n = model.components();
    let beta = model.beta();
    let chunks = states.min(256);
    let per = states.div_ceil(chunks);
    let partial: Vec<(Complex64, Complex64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(Complex64, Complex64)> {
            let mut digits = vec![0usize; sites];
            let mut config = vec![0.0; sites * n];
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = Complex64::new(0.0, 0.0);
            for state in c * per..((c + 1) * per).min(states) {
                decode(state, k, &mut digits);
                let mut w = 1.0;
                for (x, &d) in digits.iter().enumerate() {
                    config[x * n..(x + 1) * n].copy_from_slice(&nodes[d].spin[..n]);
                    w *= nodes[d].weight;
                }
                let g = (-hamiltonian(model, &config)? * beta).exp() * w;
                num += g * f(&config);
                den += g;
            }
            Ok((num, den))
        })
        .collect::<Result<Vec<_>>>()?;
    let (num, den) = partial
        .iter()
        .fold((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(Error::Degenerate("Gibbs normalization vanishes or overflows".into()));
    }
    Ok(num / den)
}
