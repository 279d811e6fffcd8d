use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quadrature::gauss_legendre;
use crate::numeric::Complex64;

/// Single-spin reference measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpinMeasure {
    /// Counting measure on `{−1, +1}`.
    Ising,
    /// Finite even measure `Σ w_k δ_{x_k}` on the real line.
    Atomic { atoms: Vec<(f64, f64)> },
    /// Arc length on the unit circle (total mass 2π).
    Circle,
    /// Surface area on the unit sphere (total mass 4π).
    Sphere,
}

/// A support point of the (discretized) spin measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinNode {
    pub spin: [f64; 3],
    pub weight: f64,
}

/// Quadrature orders for the continuous spin measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureOrder {
    /// Trapezoid angles on the circle.
    pub circle: usize,
    /// Gauss–Legendre nodes in `cos θ` on the sphere.
    pub sphere_polar: usize,
    /// Trapezoid angles in azimuth on the sphere.
    pub sphere_azimuthal: usize,
}

impl Default for QuadratureOrder {
    fn default() -> Self {
        QuadratureOrder {
            circle: 64,
            sphere_polar: 32,
            sphere_azimuthal: 64,
        }
    }
}

impl QuadratureOrder {
    /// Every order halved; the companion rule for convergence checks.
    pub fn halved(&self) -> Self {
        QuadratureOrder {
            circle: (self.circle / 2).max(1),
            sphere_polar: (self.sphere_polar / 2).max(1),
            sphere_azimuthal: (self.sphere_azimuthal / 2).max(1),
        }
    }
}

impl SpinMeasure {
    /// Number of spin components `N`.
    pub fn components(&self) -> usize {
        match self {
            SpinMeasure::Ising | SpinMeasure::Atomic { .. } => 1,
            SpinMeasure::Circle => 2,
            SpinMeasure::Sphere => 3,
        }
    }

    /// True when `nodes` is a quadrature rule rather than the exact support.
    pub fn is_continuous(&self) -> bool {
        matches!(self, SpinMeasure::Circle | SpinMeasure::Sphere)
    }

    /// True when spins are unit vectors.
    pub fn is_spherical(&self) -> bool {
        self.is_continuous()
    }

    pub fn validate(&self) -> Result<()> {
        if let SpinMeasure::Atomic { atoms } = self {
            if atoms.is_empty() {
                return Err(Error::Argument("atomic spin measure needs at least one atom".into()));
            }
            if atoms.iter().any(|&(x, w)| !x.is_finite() || !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Argument("atoms need finite positions and positive weights".into()));
            }
            for &(x, w) in atoms {
                let mirrored: f64 = atoms.iter().filter(|a| a.0 == -x).map(|a| a.1).sum();
                let own: f64 = atoms.iter().filter(|a| a.0 == x).map(|a| a.1).sum();
                if (mirrored - own).abs() > 1e-12 * own.max(w) {
                    return Err(Error::Argument(format!(
                        "atomic spin measure must be even; atom at {x} has no mirror of equal weight"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest `|σ¹|` on the support.
    pub fn max_abs_first_component(&self) -> f64 {
        match self {
            SpinMeasure::Atomic { atoms } => atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max),
            _ => 1.0,
        }
    }

    /// Support points with weights: exact for discrete measures, the
    /// product quadrature rule for the circle and sphere.
    pub fn nodes(&self, order: &QuadratureOrder) -> Vec<SpinNode> {
        match self {
            SpinMeasure::Ising => vec![
                SpinNode { spin: [-1.0, 0.0, 0.0], weight: 1.0 },
                SpinNode { spin: [1.0, 0.0, 0.0], weight: 1.0 },
            ],
            SpinMeasure::Atomic { atoms } => atoms
                .iter()
                .map(|&(x, w)| SpinNode { spin: [x, 0.0, 0.0], weight: w })
                .collect(),
            SpinMeasure::Circle => {
                let n = order.circle.max(1);
                (0..n)
                    .map(|k| {
                        let t = TAU * k as f64 / n as f64;
                        SpinNode {
                            spin: [t.cos(), t.sin(), 0.0],
                            weight: TAU / n as f64,
                        }
                    })
                    .collect()
            }
            SpinMeasure::Sphere => {
                let gl = gauss_legendre(order.sphere_polar.max(1));
                let m = order.sphere_azimuthal.max(1);
                let mut out = Vec::with_capacity(gl.len() * m);
                for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for k in 0..m {
                        let p = TAU * k as f64 / m as f64;
                        out.push(SpinNode {
                            spin: [s * p.cos(), s * p.sin(), c],
                            weight: w * TAU / m as f64,
                        });
                    }
                }
                out
            }
        }
    }

    /// Total mass of the measure.
    pub fn total_mass(&self) -> f64 {
        match self {
            SpinMeasure::Ising => 2.0,
            SpinMeasure::Atomic { atoms } => atoms.iter().map(|a| a.1).sum(),
            SpinMeasure::Circle => TAU,
            SpinMeasure::Sphere => 4.0 * PI,
        }
    }
}

/// Hypercubic box `{0,…,ℓ−1}^d` with nearest-neighbour edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub side: usize,
    /// Wrap-around edges; only added when `side > 2`, since for `side = 2`
    /// the wrapped edge would duplicate the direct one.
    pub periodic: bool,
}

impl Lattice {
    pub fn new(dim: usize, side: usize, periodic: bool) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::Argument("lattice dimension and side must be positive".into()));
        }
        let sites = (side as f64).powi(dim as i32);
        if sites > 1e8 {
            return Err(Error::Capability(format!("{side}^{dim} sites is too many")));
        }
        Ok(Lattice { dim, side, periodic })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut c = Vec::with_capacity(self.dim);
        let mut s = site;
        for _ in 0..self.dim {
            c.push(s % self.side);
            s /= self.side;
        }
        c
    }

    /// Edges `(x, y)` with `x < y` in the index order, axis by axis.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let n = self.sites();
        for x in 0..n {
            let c = self.coords(x);
            let mut stride = 1;
            for &ci in &c {
                if ci + 1 < self.side {
                    out.push((x, x + stride));
                } else if self.periodic && self.side > 2 {
                    out.push((x - (self.side - 1) * stride, x));
                }
                stride *= self.side;
            }
        }
        out.sort_unstable();
        out
    }

    /// Maximum number of neighbours of a site, `2d` in the bulk.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.sites()];
        for (x, y) in self.edges() {
            deg[x] += 1;
            deg[y] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

/// Ferromagnetic lattice spin model: `H = −Σ_edges Σ_i J^i σ_x^i σ_y^i −
/// Σ_x Σ_i h_x^i σ_x^i`, Gibbs weight `e^{−βH}` against the product of
/// single-spin measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    lattice: Lattice,
    measure: SpinMeasure,
    edges: Vec<(usize, usize)>,
    couplings: Vec<[f64; 3]>,
    field: Vec<[Complex64; 3]>,
    beta: f64,
    quadrature: QuadratureOrder,
    ferromagnetic: bool,
}

fn ferromagnetic_coupling(n: usize, j: &[f64; 3]) -> bool {
    match n {
        1 => j[0] >= 0.0,
        2 => j[0] >= j[1].abs(),
        _ => j[0] >= j[1].abs().max(j[2].abs()) && j[2] >= 0.0,
    }
}

impl SpinModel {
    /// Uniform couplings and field. Components beyond the measure's `N`
    /// must be zero.
    pub fn new(
        lattice: Lattice,
        measure: SpinMeasure,
        coupling: [f64; 3],
        field: [Complex64; 3],
        beta: f64,
    ) -> Result<Self> {
        measure.validate()?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Argument(format!("inverse temperature must be positive, got {beta}")));
        }
        let edges = lattice.edges();
        let n_sites = lattice.sites();
        let mut model = SpinModel {
            lattice,
            couplings: vec![coupling; edges.len()],
            edges,
            field: vec![field; n_sites],
            measure,
            beta,
            quadrature: QuadratureOrder::default(),
            ferromagnetic: true,
        };
        model.check_components()?;
        model.refresh();
        Ok(model)
    }

    /// Ising model with uniform real coupling and field.
    pub fn ising(lattice: Lattice, j: f64, h: f64, beta: f64) -> Result<Self> {
        SpinModel::new(
            lattice,
            SpinMeasure::Ising,
            [j, 0.0, 0.0],
            [Complex64::new(h, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            beta,
        )
    }

    fn check_components(&self) -> Result<()> {
        let n = self.components();
        for j in &self.couplings {
            if j.iter().any(|x| !x.is_finite()) || j[n..].iter().any(|&x| x != 0.0) {
                return Err(Error::Argument(format!(
                    "couplings must be finite and vanish beyond component {n}"
                )));
            }
        }
        for h in &self.field {
            if h.iter().any(|x| !x.is_finite()) || h[n..].iter().any(|x| x.norm() != 0.0) {
                return Err(Error::Argument(format!(
                    "field must be finite and vanish beyond component {n}"
                )));
            }
        }
        Ok(())
    }

    fn refresh(&mut self) {
        let n = self.components();
        self.ferromagnetic = self.couplings.iter().all(|j| ferromagnetic_coupling(n, j));
    }

    /// Replaces the coupling on one edge (given by its endpoints).
    pub fn with_edge_coupling(mut self, x: usize, y: usize, coupling: [f64; 3]) -> Result<Self> {
        let key = (x.min(y), x.max(y));
        let idx = self
            .edges
            .iter()
            .position(|&e| e == key)
            .ok_or_else(|| Error::Argument(format!("({x}, {y}) is not an edge")))?;
        self.couplings[idx] = coupling;
        self.check_components()?;
        self.refresh();
        Ok(self)
    }

    /// Replaces the field at one site.
    pub fn with_site_field(mut self, x: usize, field: [Complex64; 3]) -> Result<Self> {
        if x >= self.field.len() {
            return Err(Error::Argument(format!("site {x} out of range")));
        }
        self.field[x] = field;
        self.check_components()?;
        Ok(self)
    }

    /// Same model with every site field replaced.
    pub fn with_field(mut self, field: Vec<[Complex64; 3]>) -> Result<Self> {
        if field.len() != self.field.len() {
            return Err(Error::Argument("field length differs from site count".into()));
        }
        self.field = field;
        self.check_components()?;
        Ok(self)
    }

    pub fn with_quadrature(mut self, order: QuadratureOrder) -> Self {
        self.quadrature = order;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Argument(format!("inverse temperature must be positive, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn measure(&self) -> &SpinMeasure {
        &self.measure
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn couplings(&self) -> &[[f64; 3]] {
        &self.couplings
    }

    pub fn field(&self) -> &[[Complex64; 3]] {
        &self.field
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn quadrature(&self) -> &QuadratureOrder {
        &self.quadrature
    }

    /// Coupling dominance per edge as required for the Lee–Yang property.
    pub fn is_ferromagnetic(&self) -> bool {
        self.ferromagnetic
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn components(&self) -> usize {
        self.measure.components()
    }

    pub fn has_real_field(&self) -> bool {
        self.field.iter().all(|h| h.iter().all(|c| c.im == 0.0))
    }

    /// `max_{x,i} |h_x^i|`.
    pub fn max_field(&self) -> f64 {
        self.field
            .iter()
            .flat_map(|h| h.iter().map(|c| c.norm()))
            .fold(0.0, f64::max)
    }

    /// `max_{e,i} |J_e^i|`.
    pub fn max_coupling(&self) -> f64 {
        self.couplings
            .iter()
            .flat_map(|j| j.iter().map(|c| c.abs()))
            .fold(0.0, f64::max)
    }

    /// Smallest first field component over sites (real parts).
    pub fn min_first_field(&self) -> f64 {
        self.field.iter().map(|h| h[0].re).fold(f64::INFINITY, f64::min)
    }

    /// Same model with `shift` added to the first field component everywhere.
    pub fn shifted_first_field(&self, shift: Complex64) -> SpinModel {
        let mut out = self.clone();
        for h in &mut out.field {
            h[0] += shift;
        }
        out
    }

    /// Neighbour lists `(neighbour, edge index)` per site.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.sites()];
        for (e, &(x, y)) in self.edges.iter().enumerate() {
            adj[x].push((y, e));
            adj[y].push((x, e));
        }
        adj
    }
}

/// `H(σ)` for a configuration stored site-major with stride `N`.
pub fn hamiltonian(model: &SpinModel, config: &[f64]) -> Result<Complex64> {
    let n = model.components();
    if config.len() != model.sites() * n {
        return Err(Error::Argument(format!(
            "configuration has {} entries, expected {} sites × {n} components",
            config.len(),
            model.sites()
        )));
    }
    let mut coupling = 0.0;
    for (e, &(x, y)) in model.edges.iter().enumerate() {
        let j = &model.couplings[e];
        for i in 0..n {
            coupling += j[i] * config[x * n + i] * config[y * n + i];
        }
    }
    let mut field = Complex64::new(0.0, 0.0);
    for (x, h) in model.field.iter().enumerate() {
        for i in 0..n {
            field += h[i] * config[x * n + i];
        }
    }
    Ok(-coupling - field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn two_site_ising_energies() {
        let lat = Lattice::new(1, 2, false).unwrap();
        let m = SpinModel::ising(lat, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(hamiltonian(&m, &[1.0, 1.0]).unwrap(), c(-1.0));
        let m = SpinModel::ising(lat, 1.0, 0.5, 1.0).unwrap();
        assert_eq!(hamiltonian(&m, &[1.0, -1.0]).unwrap(), c(1.0));
        assert!(hamiltonian(&m, &[1.0]).is_err());
    }

    #[test]
    fn xy_coupling_term_orthogonal_spins() {
        let lat = Lattice::new(1, 2, false).unwrap();
        let m = SpinModel::new(lat, SpinMeasure::Circle, [1.0, 0.0, 0.0], [c(0.3), c(0.0), c(0.0)], 1.0).unwrap();
        // angles 0 and π/2; only the field acts on the first spin
        let cfg = [1.0, 0.0, 0.0, 1.0];
        assert_abs_diff_eq!(hamiltonian(&m, &cfg).unwrap().re, -0.3, epsilon = 1e-15);
    }

    #[test]
    fn lattice_edges() {
        assert_eq!(Lattice::new(1, 4, false).unwrap().edges(), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(Lattice::new(1, 4, true).unwrap().edges().len(), 4);
        assert_eq!(Lattice::new(1, 2, true).unwrap().edges(), vec![(0, 1)]);
        let sq = Lattice::new(2, 2, false).unwrap();
        assert_eq!(sq.edges(), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        let cube = Lattice::new(2, 3, false).unwrap();
        assert_eq!(cube.edges().len(), 12);
        assert_eq!(cube.max_degree(), 4);
        assert_eq!(Lattice::new(2, 4, true).unwrap().edges().len(), 32);
    }

    #[test]
    fn ferromagnetic_flags() {
        let lat = Lattice::new(1, 2, false).unwrap();
        assert!(SpinModel::ising(lat, 1.0, 0.0, 1.0).unwrap().is_ferromagnetic());
        assert!(!SpinModel::ising(lat, -1.0, 0.0, 1.0).unwrap().is_ferromagnetic());
        let xy = |j: [f64; 3]| SpinModel::new(lat, SpinMeasure::Circle, j, [c(0.0); 3], 1.0);
        assert!(xy([1.0, 0.5, 0.0]).unwrap().is_ferromagnetic());
        assert!(!xy([0.5, -1.0, 0.0]).unwrap().is_ferromagnetic());
        assert!(xy([1.0, 0.0, 1.0]).is_err());
        let heis = |j: [f64; 3]| SpinModel::new(lat, SpinMeasure::Sphere, j, [c(0.0); 3], 1.0).unwrap();
        assert!(heis([1.0, -0.5, 0.5]).is_ferromagnetic());
        assert!(!heis([1.0, 0.5, -0.5]).is_ferromagnetic());
        assert!(!heis([1.0, 1.5, 0.5]).is_ferromagnetic());
    }

    #[test]
    fn rejects_bad_parameters() {
        let lat = Lattice::new(1, 2, false).unwrap();
        assert!(SpinModel::ising(lat, 1.0, 0.0, 0.0).is_err());
        let odd = SpinMeasure::Atomic { atoms: vec![(1.0, 1.0), (-1.0, 2.0)] };
        assert!(SpinModel::new(lat, odd, [1.0, 0.0, 0.0], [c(0.0); 3], 1.0).is_err());
    }

    #[test]
    fn quadrature_masses() {
        let order = QuadratureOrder::default();
        for m in [SpinMeasure::Circle, SpinMeasure::Sphere, SpinMeasure::Ising] {
            let mass: f64 = m.nodes(&order).iter().map(|n| n.weight).sum();
            assert_abs_diff_eq!(mass, m.total_mass(), epsilon = 1e-12);
        }
        for node in SpinMeasure::Sphere.nodes(&order) {
            let norm: f64 = node.spin.iter().map(|s| s * s).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
        // ∫ (σ¹)² dσ over S² = 4π/3
        let second: f64 = SpinMeasure::Sphere.nodes(&order).iter().map(|n| n.weight * n.spin[0].powi(2)).sum();
        assert_abs_diff_eq!(second, 4.0 * PI / 3.0, epsilon = 1e-12);
    }
}
