use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{SpinMeasure, SpinModel};
use crate::error::{Error, Result};
use crate::numeric::rng::stream_rng;
use crate::numeric::stats::integrated_autocorrelation_time;

/// Largest number of stored spin coordinates in a [`SpinSampleSet`].
pub const MAX_STORED_COORDINATES: usize = 200_000_000;

/// Run lengths and proposal scale for single-site Metropolis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetropolisConfig {
    /// Samples recorded over all chains.
    pub n_samples: usize,
    /// Sweeps discarded at the start of each chain.
    pub burn_in: usize,
    /// Sweeps between recorded samples.
    pub thinning: usize,
    pub seed: u64,
    /// Independent chains; chain `c` draws from stream `c` of the seed.
    pub chains: usize,
    /// Half-width of the angle step on the circle and angular radius of
    /// the proposal cap on the sphere.
    pub proposal_width: f64,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        MetropolisConfig {
            n_samples: 10_000,
            burn_in: 1_000,
            thinning: 1,
            seed: 0,
            chains: 1,
            proposal_width: 1.0,
        }
    }
}

impl MetropolisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Argument("n_samples must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Argument("thinning must be at least 1".into()));
        }
        if self.chains == 0 || self.chains > self.n_samples {
            return Err(Error::Argument(format!(
                "chains must lie in 1..={}, got {}",
                self.n_samples, self.chains
            )));
        }
        if !(self.proposal_width > 0.0) || !self.proposal_width.is_finite() {
            return Err(Error::Argument("proposal_width must be positive".into()));
        }
        Ok(())
    }

    /// Samples recorded by each chain.
    pub fn chain_lengths(&self) -> Vec<usize> {
        let base = self.n_samples / self.chains;
        let extra = self.n_samples % self.chains;
        (0..self.chains).map(|c| base + usize::from(c < extra)).collect()
    }
}

/// Configurations drawn from the Gibbs measure, site-major with stride `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSampleSet {
    pub configurations: Vec<Vec<f64>>,
    /// Importance weights; `None` means uniform.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    /// Consecutive runs of `configurations` produced by the same chain.
    pub chain_lengths: Vec<usize>,
    pub sites: usize,
    pub components: usize,
    pub acceptance_rate: f64,
}

impl SpinSampleSet {
    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }

    /// `S = Σ_x σ_x¹` per sample.
    pub fn total_spin(&self) -> Vec<f64> {
        self.configurations
            .iter()
            .map(|c| c.iter().step_by(self.components).sum())
            .collect()
    }

    /// Splits a per-sample series into its chains.
    pub fn split_chains<'a, T>(&self, series: &'a [T]) -> Vec<&'a [T]> {
        let mut out = Vec::with_capacity(self.chain_lengths.len());
        let mut start = 0;
        for &len in &self.chain_lengths {
            out.push(&series[start..start + len]);
            start += len;
        }
        out
    }
}

/// Scalar observable recorded along Metropolis chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub chains: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

impl ObservableSeries {
    pub fn values(&self) -> Vec<f64> {
        self.chains.concat()
    }

    pub fn summary(&self) -> SeriesSummary {
        let refs: Vec<&[f64]> = self.chains.iter().map(|c| c.as_slice()).collect();
        summarize_chains(&refs)
    }
}

/// Mean of a correlated series with its autocorrelation-adjusted error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean: f64,
    /// Sample variance of the pooled series.
    pub variance: f64,
    /// Sum over chains of `n_c / τ_c`.
    pub effective_samples: f64,
    pub standard_error: f64,
}

/// Pools chains: the variance is taken about the grand mean and the
/// effective size adds per-chain `n / τ`.
pub fn summarize_chains(chains: &[&[f64]]) -> SeriesSummary {
    let n: usize = chains.iter().map(|c| c.len()).sum();
    let mean = chains.iter().flat_map(|c| c.iter()).sum::<f64>() / n as f64;
    let ss: f64 = chains.iter().flat_map(|c| c.iter()).map(|x| (x - mean).powi(2)).sum();
    let variance = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
    let effective_samples: f64 = chains
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.len() as f64 / integrated_autocorrelation_time(c))
        .sum();
    SeriesSummary {
        mean,
        variance,
        effective_samples,
        standard_error: (variance / effective_samples.max(1.0)).sqrt(),
    }
}

enum Proposal {
    /// Flip with probability 1/2, i.e. a fresh draw from `μ₀`. Always
    /// flipping makes the chain periodic as `β → 0`.
    Flip,
    Atom { positions: Vec<f64>, log_weights: Vec<f64>, cumulative: Vec<f64> },
    Angle { width: f64 },
    Cap { cos_radius: f64 },
}

struct Chain<'a> {
    n: usize,
    beta: f64,
    adjacency: &'a [Vec<(usize, usize)>],
    couplings: &'a [[f64; 3]],
    field: &'a [[f64; 3]],
    proposal: &'a Proposal,
    state: Vec<f64>,
    atoms: Vec<usize>,
    rng: ChaCha8Rng,
    accepted: u64,
    proposed: u64,
}

fn uniform_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

fn draw_atom(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Uniform point on the cap of angular radius `acos(cos_radius)` about `s`.
fn cap_step(s: &[f64], cos_radius: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let c = 1.0 - rng.random::<f64>() * (1.0 - cos_radius);
    let phi: f64 = rng.random_range(0.0..TAU);
    let sn = (1.0 - c * c).max(0.0).sqrt();
    // orthonormal frame perpendicular to s
    let helper = if s[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = helper[0] * s[0] + helper[1] * s[1] + helper[2] * s[2];
    let mut a = [helper[0] - dot * s[0], helper[1] - dot * s[1], helper[2] - dot * s[2]];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    a.iter_mut().for_each(|v| *v /= na);
    let b = [
        s[1] * a[2] - s[2] * a[1],
        s[2] * a[0] - s[0] * a[2],
        s[0] * a[1] - s[1] * a[0],
    ];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = c * s[i] + sn * (phi.cos() * a[i] + phi.sin() * b[i]);
    }
    let norm = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    out.map(|v| v / norm)
}

impl Chain<'_> {
    fn initialize(&mut self, sites: usize) {
        self.state = vec![0.0; sites * self.n];
        self.atoms = vec![0; sites];
        for x in 0..sites {
            let s = &mut self.state[x * self.n..(x + 1) * self.n];
            match self.proposal {
                Proposal::Flip => s[0] = if self.rng.random::<bool>() { 1.0 } else { -1.0 },
                Proposal::Atom { positions, cumulative, .. } => {
                    let k = draw_atom(cumulative, &mut self.rng);
                    self.atoms[x] = k;
                    s[0] = positions[k];
                }
                Proposal::Angle { .. } => {
                    let t: f64 = self.rng.random_range(0.0..TAU);
                    s[0] = t.cos();
                    s[1] = t.sin();
                }
                Proposal::Cap { .. } => s.copy_from_slice(&uniform_sphere(&mut self.rng)),
            }
        }
    }

    fn sweep(&mut self) {
        let n = self.n;
        for x in 0..self.adjacency.len() {
            let mut local = self.field[x];
            for &(y, e) in &self.adjacency[x] {
                let j = &self.couplings[e];
                for i in 0..n {
                    local[i] += j[i] * self.state[y * n + i];
                }
            }
            let old = &self.state[x * n..(x + 1) * n];
            let mut new = [0.0; 3];
            let mut log_ratio = 0.0;
            let mut new_atom = 0;
            match self.proposal {
                Proposal::Flip => new[0] = if self.rng.random::<bool>() { -old[0] } else { old[0] },
                Proposal::Atom { positions, log_weights, .. } => {
                    new_atom = self.rng.random_range(0..positions.len());
                    new[0] = positions[new_atom];
                    log_ratio = log_weights[new_atom] - log_weights[self.atoms[x]];
                }
                Proposal::Angle { width } => {
                    let t = old[1].atan2(old[0]) + self.rng.random_range(-*width..=*width);
                    new[0] = t.cos();
                    new[1] = t.sin();
                }
                Proposal::Cap { cos_radius } => new = cap_step(old, *cos_radius, &mut self.rng),
            }
            for i in 0..n {
                log_ratio += self.beta * local[i] * (new[i] - old[i]);
            }
            self.proposed += 1;
            if log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp() {
                self.state[x * n..(x + 1) * n].copy_from_slice(&new[..n]);
                self.atoms[x] = new_atom;
                self.accepted += 1;
            }
        }
    }
}

fn build_proposal(measure: &SpinMeasure, width: f64) -> Proposal {
    match measure {
        SpinMeasure::Ising => Proposal::Flip,
        SpinMeasure::Atomic { atoms } => {
            let mut acc = 0.0;
            Proposal::Atom {
                positions: atoms.iter().map(|a| a.0).collect(),
                log_weights: atoms.iter().map(|a| a.1.ln()).collect(),
                cumulative: atoms
                    .iter()
                    .map(|a| {
                        acc += a.1;
                        acc
                    })
                    .collect(),
            }
        }
        SpinMeasure::Circle => Proposal::Angle { width: width.min(PI) },
        SpinMeasure::Sphere => Proposal::Cap { cos_radius: width.min(PI).cos() },
    }
}

/// Runs the configured chains in parallel and hands every recorded
/// configuration to `record(chain, state)`. Returns the acceptance rate.
fn run_chains<T, F>(model: &SpinModel, config: &MetropolisConfig, record: F) -> Result<(Vec<Vec<T>>, f64)>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    config.validate()?;
    if !model.has_real_field() {
        return Err(Error::Argument("Metropolis sampling needs a real field".into()));
    }
    let field: Vec<[f64; 3]> = model.field().iter().map(|h| h.map(|c| c.re)).collect();
    let adjacency = model.adjacency();
    let proposal = build_proposal(model.measure(), config.proposal_width);
    let lengths = config.chain_lengths();
    let runs: Vec<(Vec<T>, u64, u64)> = lengths
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut chain = Chain {
                n: model.components(),
                beta: model.beta(),
                adjacency: &adjacency,
                couplings: model.couplings(),
                field: &field,
                proposal: &proposal,
                state: Vec::new(),
                atoms: Vec::new(),
                rng: stream_rng(config.seed, c as u64),
                accepted: 0,
                proposed: 0,
            };
            chain.initialize(model.sites());
            for _ in 0..config.burn_in {
                chain.sweep();
            }
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                for _ in 0..config.thinning {
                    chain.sweep();
                }
                out.push(record(&chain.state));
            }
            (out, chain.accepted, chain.proposed)
        })
        .collect();
    let accepted: u64 = runs.iter().map(|r| r.1).sum();
    let proposed: u64 = runs.iter().map(|r| r.2).sum();
    let rate = if proposed > 0 { accepted as f64 / proposed as f64 } else { 0.0 };
    Ok((runs.into_iter().map(|r| r.0).collect(), rate))
}

/// Single-site Metropolis samples of the Gibbs measure `∝ e^{−βH} Π dμ₀`.
pub fn metropolis_sample(model: &SpinModel, config: &MetropolisConfig) -> Result<SpinSampleSet> {
    let coords = config.n_samples.saturating_mul(model.sites() * model.components());
    if coords > MAX_STORED_COORDINATES {
        return Err(Error::Capability(format!(
            "{coords} stored coordinates exceed {MAX_STORED_COORDINATES}; record an observable instead"
        )));
    }
    let (chains, rate) = run_chains(model, config, |s| s.to_vec())?;
    Ok(SpinSampleSet {
        chain_lengths: chains.iter().map(|c| c.len()).collect(),
        configurations: chains.concat(),
        weights: None,
        seed: config.seed,
        burn_in: config.burn_in,
        thinning: config.thinning,
        sites: model.sites(),
        components: model.components(),
        acceptance_rate: rate,
    })
}

/// Same chains as [`metropolis_sample`], keeping only `f(configuration)`.
pub fn metropolis_observable<F>(model: &SpinModel, config: &MetropolisConfig, f: F) -> Result<ObservableSeries>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (chains, acceptance_rate) = run_chains(model, config, f)?;
    Ok(ObservableSeries { chains, acceptance_rate })
}

/// Samples of the total first spin component `S = Σ_x σ_x¹`.
pub fn metropolis_total_spin(model: &SpinModel, config: &MetropolisConfig) -> Result<ObservableSeries> {
    let n = model.components();
    metropolis_observable(model, config, |s| s.iter().step_by(n).sum())
}

/// Estimated first-component pair covariances with their error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// `Cov(σ_x¹, σ_y¹)`; the diagonal holds variances.
    pub covariances: Vec<Vec<f64>>,
    pub standard_errors: Vec<Vec<f64>>,
    /// Smallest off-diagonal covariance (the variance for a single site).
    pub min_covariance: f64,
    pub min_pair: (usize, usize),
    pub min_standard_error: f64,
    /// Every pair satisfies `cov ≥ −3·s.e.`.
    pub consistent_with_nonnegative: bool,
    /// Smallest effective sample size over the pair products.
    pub min_effective_samples: f64,
    /// Fewer than [`MIN_EFFECTIVE_SAMPLES`] effective samples for some pair.
    pub low_sample_warning: bool,
}

/// Effective samples below which error bars are flagged as unreliable.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

/// Pair covariances of the first spin component with autocorrelation
/// adjusted standard errors (Kish effective size for weighted samples).
pub fn spin_correlation_check(samples: &SpinSampleSet) -> Result<CorrelationReport> {
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let (sites, n) = (samples.sites, samples.components);
    let len = samples.len();
    if samples.configurations.iter().any(|c| c.len() != sites * n) {
        return Err(Error::Argument("configuration length differs from sites × components".into()));
    }
    if samples.chain_lengths.iter().sum::<usize>() != len {
        return Err(Error::Argument("chain lengths do not add up to the sample count".into()));
    }
    let weights: Vec<f64> = match &samples.weights {
        Some(w) if w.len() != len => return Err(Error::Argument("one weight per sample required".into())),
        Some(w) if w.iter().any(|&v| !(v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 => {
            return Err(Error::Argument("weights must be nonnegative and not all zero".into()))
        }
        Some(w) => w.clone(),
        None => vec![1.0; len],
    };
    let wsum: f64 = weights.iter().sum();
    let first: Vec<Vec<f64>> = (0..sites)
        .map(|x| samples.configurations.iter().map(|c| c[x * n]).collect())
        .collect();
    let means: Vec<f64> = first
        .iter()
        .map(|s| s.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / wsum)
        .collect();
    let pairs: Vec<(usize, usize)> = (0..sites).flat_map(|x| (x..sites).map(move |y| (x, y))).collect();
    let stats: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let prod: Vec<f64> = first[x]
                .iter()
                .zip(&first[y])
                .map(|(a, b)| (a - means[x]) * (b - means[y]))
                .collect();
            let cov = prod.iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>() / wsum;
            if samples.weights.is_some() {
                let ess = wsum * wsum / weights.iter().map(|w| w * w).sum::<f64>();
                let var = prod
                    .iter()
                    .zip(&weights)
                    .map(|(p, w)| w * (p - cov).powi(2))
                    .sum::<f64>()
                    / wsum;
                (cov, (var / ess).sqrt(), ess)
            } else {
                let s = summarize_chains(&samples.split_chains(&prod));
                (cov, s.standard_error, s.effective_samples)
            }
        })
        .collect();
    let mut covariances = vec![vec![0.0; sites]; sites];
    let mut standard_errors = vec![vec![0.0; sites]; sites];
    let mut min = (f64::INFINITY, (0, 0), 0.0);
    let mut consistent = true;
    let mut min_ess = f64::INFINITY;
    for (&(x, y), &(cov, se, ess)) in pairs.iter().zip(&stats) {
        covariances[x][y] = cov;
        covariances[y][x] = cov;
        standard_errors[x][y] = se;
        standard_errors[y][x] = se;
        min_ess = min_ess.min(ess);
        if x != y || sites == 1 {
            if cov < min.0 {
                min = (cov, (x, y), se);
            }
            if x != y && cov < -3.0 * se {
                consistent = false;
            }
        }
    }
    Ok(CorrelationReport {
        covariances,
        standard_errors,
        min_covariance: min.0,
        min_pair: min.1,
        min_standard_error: min.2,
        consistent_with_nonnegative: consistent,
        min_effective_samples: min_ess,
        low_sample_warning: min_ess < MIN_EFFECTIVE_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::super::exact::{direct_gibbs_expectation, ExactSolver};
    use super::super::model::Lattice;
    use super::*;
    use crate::numeric::stats::chi_square_test;
    use crate::numeric::Complex64;

    fn ising(dim: usize, side: usize, j: f64, h: f64, beta: f64) -> SpinModel {
        SpinModel::ising(Lattice::new(dim, side, false).unwrap(), j, h, beta).unwrap()
    }

    fn config(n: usize, seed: u64, chains: usize) -> MetropolisConfig {
        MetropolisConfig {
            n_samples: n,
            burn_in: 200,
            thinning: 1,
            seed,
            chains,
            proposal_width: 1.0,
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = ising(2, 3, 1.0, 0.1, 0.4);
        let a = metropolis_sample(&m, &config(500, 7, 3)).unwrap();
        let b = metropolis_sample(&m, &config(500, 7, 3)).unwrap();
        let c = metropolis_sample(&m, &config(500, 8, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.configurations, c.configurations);
        assert_eq!(a.chain_lengths, vec![167, 167, 166]);
    }

    #[test]
    fn one_site_magnetization_is_tanh() {
        let m = ising(1, 1, 0.0, 1.0, 1.0);
        let s = metropolis_total_spin(&m, &config(200_000, 1, 4)).unwrap().summary();
        let exact = 1f64.tanh();
        assert!((s.mean - exact).abs() < 3.0 * s.standard_error, "{} vs {exact} ± {}", s.mean, s.standard_error);
    }

    #[test]
    fn two_by_two_total_spin_matches_enumeration() {
        let m = ising(2, 2, 1.0, 0.3, 0.5);
        let (exact, _) = ExactSolver::new(&m).unwrap().total_spin_moments().unwrap();
        let s = metropolis_total_spin(&m, &config(200_000, 2, 4)).unwrap().summary();
        assert!((s.mean - exact).abs() < 3.0 * s.standard_error, "{} vs {exact} ± {}", s.mean, s.standard_error);
    }

    #[test]
    fn infinite_temperature_is_product_measure() {
        let m = ising(2, 4, 1.0, 0.0, 1e-6);
        let set = metropolis_sample(&m, &config(20_000, 3, 4)).unwrap();
        let total = set.total_spin();
        let chains = set.split_chains(&total);
        let s = summarize_chains(&chains);
        assert!(s.mean.abs() < 3.0 * s.standard_error);
        let ups = set.configurations.iter().filter(|c| c[5] > 0.0).count() as u64;
        let (_, p) = chi_square_test(&[ups, set.len() as u64 - ups], &[0.5, 0.5]).unwrap();
        assert!(p > 0.01, "p = {p}");
        let rep = spin_correlation_check(&set).unwrap();
        for x in 0..16 {
            for y in x + 1..16 {
                assert!(rep.covariances[x][y].abs() < 4.0 * rep.standard_errors[x][y]);
            }
        }
    }

    #[test]
    fn detailed_balance_on_one_site() {
        let m = ising(1, 1, 0.0, 1.0, 1.0);
        let series = metropolis_total_spin(&m, &config(400_000, 4, 1)).unwrap();
        let s = &series.chains[0];
        let mut counts = [[0u64; 2]; 2];
        for w in s.windows(2) {
            counts[usize::from(w[0] > 0.0)][usize::from(w[1] > 0.0)] += 1;
        }
        let n = (s.len() - 1) as f64;
        // flux down vs flux up per step: π₊P₊₋ vs π₋P₋₊
        let down = counts[1][0] as f64 / n;
        let up = counts[0][1] as f64 / n;
        let se = ((down + up) / n).sqrt();
        assert!((down - up).abs() < 3.0 * se, "{down} vs {up}");
        let z = 2.0 * 1f64.cosh();
        // proposal flips with probability 1/2
        let exact = 0.5 * (-1f64).exp() / z;
        assert!((down - exact).abs() < 5.0 * (exact / n).sqrt());
    }

    #[test]
    fn two_site_covariance_is_tanh_beta() {
        let m = ising(1, 2, 1.0, 0.0, 1.0);
        let set = metropolis_sample(&m, &config(200_000, 5, 4)).unwrap();
        let rep = spin_correlation_check(&set).unwrap();
        let exact = 1f64.tanh();
        assert!((rep.covariances[0][1] - exact).abs() < 3.0 * rep.standard_errors[0][1]);
        assert!(rep.consistent_with_nonnegative);
        assert!(!rep.low_sample_warning);
    }

    #[test]
    fn xy_square_correlations_nonnegative() {
        let m = SpinModel::new(
            Lattice::new(2, 2, false).unwrap(),
            SpinMeasure::Circle,
            [1.0, 0.5, 0.0],
            [Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let set = metropolis_sample(&m, &config(50_000, 6, 4)).unwrap();
        for c in &set.configurations {
            for x in 0..4 {
                assert!((c[2 * x].hypot(c[2 * x + 1]) - 1.0).abs() < 1e-12);
            }
        }
        let rep = spin_correlation_check(&set).unwrap();
        assert!(rep.consistent_with_nonnegative, "min {}", rep.min_covariance);
    }

    #[test]
    fn heisenberg_matches_quadrature() {
        let m = SpinModel::new(
            Lattice::new(1, 2, false).unwrap(),
            SpinMeasure::Sphere,
            [1.0, 1.0, 1.0],
            [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let z = direct_gibbs_expectation(&m, |_| Complex64::new(1.0, 0.0)).unwrap();
        let s1 = direct_gibbs_expectation(&m, |c| Complex64::new(c[0] + c[3], 0.0)).unwrap();
        let exact = s1.re / z.re;
        let set = metropolis_sample(&m, &config(100_000, 9, 4)).unwrap();
        for c in &set.configurations {
            for x in 0..2 {
                let r = (c[3 * x].powi(2) + c[3 * x + 1].powi(2) + c[3 * x + 2].powi(2)).sqrt();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
        let total = set.total_spin();
        let s = summarize_chains(&set.split_chains(&total));
        assert!((s.mean - exact).abs() < 3.0 * s.standard_error, "{} vs {exact}", s.mean);
    }

    #[test]
    fn atomic_measure_matches_enumeration() {
        let measure = SpinMeasure::Atomic {
            atoms: vec![(-2.0, 1.0), (-0.5, 3.0), (0.5, 3.0), (2.0, 1.0)],
        };
        let m = SpinModel::new(
            Lattice::new(1, 3, false).unwrap(),
            measure,
            [0.3, 0.0, 0.0],
            [Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let (exact, _) = ExactSolver::new(&m).unwrap().total_spin_moments().unwrap();
        let s = metropolis_total_spin(&m, &config(200_000, 10, 4)).unwrap().summary();
        assert!((s.mean - exact).abs() < 3.0 * s.standard_error, "{} vs {exact}", s.mean);
    }

    #[test]
    fn rejects_bad_input() {
        let m = ising(1, 2, 1.0, 0.0, 1.0);
        assert!(metropolis_sample(&m, &config(0, 1, 1)).is_err());
        assert!(metropolis_sample(&m, &config(10, 1, 11)).is_err());
        let complex = m.shifted_first_field(Complex64::new(0.0, 0.1));
        assert!(matches!(metropolis_sample(&complex, &config(10, 1, 1)), Err(Error::Argument(_))));
        let few = metropolis_sample(&m, &config(20, 1, 1)).unwrap();
        assert!(spin_correlation_check(&few).unwrap().low_sample_warning);
    }
}
