//! Spectral discretization and the five-block representation of observables
//! and state functionals over one bound level plus a continuum.
//!
//! Every object carries five kinds of blocks, each a `d × d` complex matrix
//! indexed by the discrete labels:
//!
//! | block        | energies      | count  |
//! |--------------|---------------|--------|
//! | `bound`      | (ω₀, ω₀)      | 1      |
//! | `continuum`  | (ω_k, ω_k)    | K      |
//! | `cont_bound` | (ω_k, ω₀)     | K      |
//! | `bound_cont` | (ω₀, ω_l)     | K      |
//! | `cont_cont`  | (ω_k, ω_l)    | K², row-major in `k` |
//!
//! The pairing is `(ρ|O) = Σ conj(ρ)_{mm′} O_{mm′}` summed over blocks, with a
//! quadrature weight `w_k` for each continuum energy that is integrated over.
//! A functional concentrated on node `k` carries `1/w_k`, so under the
//! discrete integral it behaves like `δ(ω − ω_k)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::profile::Profile;
use crate::quadrature::CompositeRule;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const NEGATIVITY_TOL: f64 = -1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Largest admissible `∫_{ω_max}^∞ |f|²` for profile-built states.
pub const TAIL_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    omega0: f64,
    omega_max: f64,
    rule: CompositeRule,
}

impl SpectrumGrid {
    pub fn new(omega0: f64, omega_max: f64, n_panels: usize, panel_order: usize) -> Result<Self> {
        if !omega0.is_finite() || omega0 >= 0.0 {
            return Err(invalid("omega0", format!("{omega0} must be finite and negative")));
        }
        if !omega_max.is_finite() || omega_max <= 0.0 {
            return Err(invalid("omega_max", format!("{omega_max} must be finite and positive")));
        }
        let rule = CompositeRule::new(0.0, omega_max, n_panels, panel_order)?;
        Ok(Self { omega0, omega_max, rule })
    }

    /// Panels between the given energies, the first of which must be 0.
    pub fn with_breakpoints(omega0: f64, breaks: &[f64], panel_order: usize) -> Result<Self> {
        if !omega0.is_finite() || omega0 >= 0.0 {
            return Err(invalid("omega0", format!("{omega0} must be finite and negative")));
        }
        if breaks.first() != Some(&0.0) {
            return Err(invalid("breakpoints", "the continuum starts at 0"));
        }
        let rule = CompositeRule::from_breakpoints(breaks, panel_order)?;
        Ok(Self { omega0, omega_max: breaks[breaks.len() - 1], rule })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    pub fn panels(&self) -> &[[f64; 2]] {
        self.rule.panels()
    }

    pub fn panel_order(&self) -> usize {
        self.rule.order()
    }

    pub fn len(&self) -> usize {
        self.rule.nodes().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rule(&self) -> &CompositeRule {
        &self.rule
    }

    /// Largest gap between neighbouring continuum nodes.
    pub fn max_spacing(&self) -> f64 {
        let nodes = self.nodes();
        let mut gap = nodes[0].max(self.omega_max - nodes[nodes.len() - 1]);
        for pair in nodes.windows(2) {
            gap = gap.max(pair[1] - pair[0]);
        }
        gap
    }

    pub fn energy(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Bound => self.omega0,
            Sector::Node(k) => self.nodes()[k],
        }
    }

    pub fn sectors(&self) -> impl Iterator<Item = Sector> {
        std::iter::once(Sector::Bound).chain((0..self.len()).map(Sector::Node))
    }
}

/// Selects the bound level or one continuum node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    Bound,
    Node(usize),
}

/// Multi-index labels shared by the bound and continuum sectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantumNumbers {
    labels: Vec<Vec<i64>>,
}

impl QuantumNumbers {
    pub fn new(labels: Vec<Vec<i64>>) -> Result<Self> {
        let Some(first) = labels.first() else {
            return Err(invalid("labels", "label set is empty"));
        };
        let axes = first.len();
        if labels.iter().any(|l| l.len() != axes) {
            return Err(invalid("labels", "labels have different numbers of components"));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(invalid("labels", format!("duplicate label {a:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// A single label `{0}`: no degeneracy.
    pub fn single() -> Self {
        Self { labels: vec![vec![0]] }
    }

    /// Parity labels `{+1}, {−1}`.
    pub fn parity() -> Self {
        Self { labels: vec![vec![1], vec![-1]] }
    }

    /// Labels `{0}, …, {n−1}`.
    pub fn range(n: usize) -> Result<Self> {
        Self::new((0..n as i64).map(|i| vec![i]).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_axes(&self) -> usize {
        self.labels[0].len()
    }

    pub fn label(&self, r: usize) -> &[i64] {
        &self.labels[r]
    }

    pub fn labels(&self) -> &[Vec<i64>] {
        &self.labels
    }

    /// Number of distinct values along each axis.
    pub fn cardinalities(&self) -> Vec<usize> {
        (0..self.n_axes())
            .map(|i| {
                let mut vals: Vec<i64> = self.labels.iter().map(|l| l[i]).collect();
                vals.sort_unstable();
                vals.dedup();
                vals.len()
            })
            .collect()
    }
}

/// The five block families, without grid context.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub bound: CMat,
    pub continuum: Vec<CMat>,
    pub cont_bound: Vec<CMat>,
    pub bound_cont: Vec<CMat>,
    pub cont_cont: Vec<CMat>,
}

impl Blocks {
    pub fn zeros(n_nodes: usize, dim: usize) -> Self {
        let z = CMat::zeros(dim, dim);
        Self {
            bound: z.clone(),
            continuum: vec![z.clone(); n_nodes],
            cont_bound: vec![z.clone(); n_nodes],
            bound_cont: vec![z.clone(); n_nodes],
            cont_cont: vec![z; n_nodes * n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.continuum.len()
    }

    pub fn dim(&self) -> usize {
        self.bound.nrows()
    }

    pub fn cc(&self, k: usize, l: usize) -> &CMat {
        &self.cont_cont[k * self.n_nodes() + l]
    }

    pub fn cc_mut(&mut self, k: usize, l: usize) -> &mut CMat {
        let n = self.n_nodes();
        &mut self.cont_cont[k * n + l]
    }

    pub fn diagonal_block(&self, sector: Sector) -> &CMat {
        match sector {
            Sector::Bound => &self.bound,
            Sector::Node(k) => &self.continuum[k],
        }
    }

    pub fn check_shape(&self, n_nodes: usize, dim: usize) -> Result<()> {
        let counts = [
            ("continuum", self.continuum.len(), n_nodes),
            ("cont_bound", self.cont_bound.len(), n_nodes),
            ("bound_cont", self.bound_cont.len(), n_nodes),
            ("cont_cont", self.cont_cont.len(), n_nodes * n_nodes),
        ];
        for (name, got, want) in counts {
            if got != want {
                return Err(Error::Shape(format!("{name} has {got} blocks, expected {want}")));
            }
        }
        if self.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::Shape(format!("every block must be {dim}×{dim}")));
        }
        Ok(())
    }

    fn iter(&self) -> impl Iterator<Item = &CMat> {
        std::iter::once(&self.bound)
            .chain(&self.continuum)
            .chain(&self.cont_bound)
            .chain(&self.bound_cont)
            .chain(&self.cont_cont)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut CMat> {
        std::iter::once(&mut self.bound)
            .chain(&mut self.continuum)
            .chain(&mut self.cont_bound)
            .chain(&mut self.bound_cont)
            .chain(&mut self.cont_cont)
    }

    /// Swaps energy arguments and conjugate-transposes every block.
    pub fn adjoint(&self) -> Self {
        let n = self.n_nodes();
        let mut cont_cont = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                cont_cont.push(self.cc(l, k).adjoint());
            }
        }
        Self {
            bound: self.bound.adjoint(),
            continuum: self.continuum.iter().map(CMat::adjoint).collect(),
            cont_bound: self.bound_cont.iter().map(CMat::adjoint).collect(),
            bound_cont: self.cont_bound.iter().map(CMat::adjoint).collect(),
            cont_cont,
        }
    }

    /// Largest entry of `B − B†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.iter().zip(adj.iter()).map(|(a, b)| max_abs(&(a - b))).fold(0.0, f64::max)
    }

    /// `(B + B†)/2`.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), &self.adjoint());
        out.scale(C64::new(0.5, 0.0));
        out
    }

    /// Largest entry among the three energy-off-diagonal families.
    pub fn off_diagonal_magnitude(&self) -> f64 {
        self.cont_bound
            .iter()
            .chain(&self.bound_cont)
            .chain(&self.cont_cont)
            .map(max_abs)
            .fold(0.0, f64::max)
    }

    pub fn is_energy_diagonal(&self) -> bool {
        self.off_diagonal_magnitude() == 0.0
    }

    pub fn scale(&mut self, s: C64) {
        for m in self.iter_mut() {
            *m *= s;
        }
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: C64, other: &Blocks) {
        for (m, o) in self.iter_mut().zip(other.iter()) {
            *m += o * a;
        }
    }

    /// Applies `f(x, x′, block)` to every block, where `(x, x′)` are its energies.
    pub fn map_with_energies(&self, grid: &SpectrumGrid, f: impl Fn(f64, f64, &CMat) -> CMat) -> Self {
        let w0 = grid.omega0();
        let nodes = grid.nodes();
        let n = nodes.len();
        let mut cont_cont = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                cont_cont.push(f(nodes[k], nodes[l], self.cc(k, l)));
            }
        }
        Self {
            bound: f(w0, w0, &self.bound),
            continuum: self.continuum.iter().zip(nodes).map(|(b, &x)| f(x, x, b)).collect(),
            cont_bound: self.cont_bound.iter().zip(nodes).map(|(b, &x)| f(x, w0, b)).collect(),
            bound_cont: self.bound_cont.iter().zip(nodes).map(|(b, &x)| f(w0, x, b)).collect(),
            cont_cont,
        }
    }

    /// Keeps the two energy-diagonal families, zeroes the rest.
    pub fn energy_diagonal_part(&self) -> Self {
        let mut out = Blocks::zeros(self.n_nodes(), self.dim());
        out.bound = self.bound.clone();
        out.continuum = self.continuum.clone();
        out
    }
}

pub(crate) fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Σ conj(a)_{ij} b_{ij}`
pub(crate) fn frobenius(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Weighted block pairing on a fixed set of weights.
pub(crate) fn pair_blocks(rho: &Blocks, o: &Blocks, w: &[f64]) -> C64 {
    let n = w.len();
    let mut total = frobenius(&rho.bound, &o.bound);
    for k in 0..n {
        let single = frobenius(&rho.continuum[k], &o.continuum[k])
            + frobenius(&rho.cont_bound[k], &o.cont_bound[k])
            + frobenius(&rho.bound_cont[k], &o.bound_cont[k]);
        let mut row = C64::new(0.0, 0.0);
        for l in 0..n {
            row += frobenius(rho.cc(k, l), o.cc(k, l)) * w[l];
        }
        total += (single + row) * w[k];
    }
    total
}

fn same_context(a: (&SpectrumGrid, &QuantumNumbers), b: (&SpectrumGrid, &QuantumNumbers)) -> Result<()> {
    if a.0 != b.0 || a.1 != b.1 {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// A state functional ρ. Only the constructors named after physical
/// properties enforce them; [`StateFn::raw`] checks shapes only.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFn {
    grid: Arc<SpectrumGrid>,
    qnums: Arc<QuantumNumbers>,
    blocks: Blocks,
}

/// Amplitudes of a pure state `a|ω₀⟩ + ∫ φ(ω)|ω⟩ dω` per label.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub bound: CVec,
    pub continuum: Vec<CVec>,
}

impl Amplitudes {
    /// One profile per label; rejects profiles with appreciable mass beyond `ω_max`.
    pub fn from_profiles(grid: &SpectrumGrid, bound: &[C64], profiles: &[Profile]) -> Result<Self> {
        if bound.len() != profiles.len() {
            return Err(Error::Shape(format!(
                "{} bound amplitudes but {} continuum profiles",
                bound.len(),
                profiles.len()
            )));
        }
        for p in profiles {
            p.check()?;
            let mass = p.tail_mass(grid.omega_max());
            if mass > TAIL_MASS_TOL {
                return Err(Error::TailMass { profile: format!("{p:?}"), mass });
            }
        }
        let samples: Vec<Vec<C64>> = profiles.iter().map(|p| p.sample(grid.nodes())).collect();
        let continuum = (0..grid.len())
            .map(|k| CVec::from_iterator(profiles.len(), samples.iter().map(|s| s[k])))
            .collect();
        Ok(Self { bound: CVec::from_column_slice(bound), continuum })
    }

    /// Continuum amplitudes multiplied by `f(ω)`.
    pub fn filtered(&self, grid: &SpectrumGrid, f: impl Fn(f64) -> f64) -> Self {
        let continuum = self.continuum.iter().zip(grid.nodes()).map(|(v, &w)| v * C64::new(f(w), 0.0)).collect();
        Self { bound: self.bound.clone(), continuum }
    }

    pub fn norm_sqr(&self, grid: &SpectrumGrid) -> f64 {
        self.bound.norm_squared()
            + self.continuum.iter().zip(grid.weights()).map(|(v, w)| w * v.norm_squared()).sum::<f64>()
    }
}

impl StateFn {
    /// Shape-checked, otherwise unvalidated.
    pub fn raw(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>, blocks: Blocks) -> Result<Self> {
        blocks.check_shape(grid.len(), qnums.len())?;
        Ok(Self { grid, qnums, blocks })
    }

    /// Rejects anything that fails [`validate_state`].
    pub fn new(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>, blocks: Blocks) -> Result<Self> {
        let rho = Self::raw(grid, qnums, blocks)?;
        rho.validate().into_result()?;
        Ok(rho)
    }

    /// The pure state with the given amplitudes, normalized.
    ///
    /// The energy-diagonal blocks hold the diagonal `φ(ω)φ(ω)†` of the
    /// kernel block, which is what the identity and other energy-diagonal
    /// observables see of a wave packet.
    pub fn pure(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>, amps: &Amplitudes) -> Result<Self> {
        let d = qnums.len();
        let n = grid.len();
        if amps.bound.len() != d || amps.continuum.len() != n || amps.continuum.iter().any(|v| v.len() != d) {
            return Err(Error::Shape("amplitudes do not match grid and labels".into()));
        }
        let norm = amps.norm_sqr(&grid);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("amplitudes", "state has zero norm"));
        }
        let s = 1.0 / norm.sqrt();
        let a = &amps.bound * C64::new(s, 0.0);
        let phi: Vec<CVec> = amps.continuum.iter().map(|v| v * C64::new(s, 0.0)).collect();
        let mut b = Blocks::zeros(n, d);
        b.bound = &a * a.adjoint();
        for k in 0..n {
            b.continuum[k] = &phi[k] * phi[k].adjoint();
            b.cont_bound[k] = &phi[k] * a.adjoint();
            b.bound_cont[k] = &a * phi[k].adjoint();
            for l in 0..n {
                *b.cc_mut(k, l) = &phi[k] * phi[l].adjoint();
            }
        }
        Ok(Self { grid, qnums, blocks: b })
    }

    /// An energy-diagonal state from its two diagonal families, normalized.
    pub fn energy_diagonal(
        grid: Arc<SpectrumGrid>,
        qnums: Arc<QuantumNumbers>,
        bound: CMat,
        continuum: Vec<CMat>,
    ) -> Result<Self> {
        let mut b = Blocks::zeros(grid.len(), qnums.len());
        b.bound = bound;
        b.continuum = continuum;
        let mut rho = Self::raw(grid, qnums, b)?;
        let tr = rho.trace();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(invalid("state", format!("trace {tr} is not positive")));
        }
        rho.blocks.scale(C64::new(1.0 / tr, 0.0));
        rho.validate().into_result()?;
        Ok(rho)
    }

    /// Convex combination; weights must be non-negative and are renormalized.
    pub fn mixture(parts: &[(f64, &StateFn)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(invalid("mixture", "no components"));
        };
        let total: f64 = parts.iter().map(|(p, _)| *p).sum();
        if parts.iter().any(|(p, _)| !(*p >= 0.0)) || !(total > 0.0) {
            return Err(invalid("mixture", "weights must be non-negative with positive sum"));
        }
        let mut blocks = Blocks::zeros(first.grid.len(), first.qnums.len());
        for (p, rho) in parts {
            same_context(first.context(), rho.context())?;
            blocks.axpy(C64::new(p / total, 0.0), &rho.blocks);
        }
        Self::new(first.grid.clone(), first.qnums.clone(), blocks)
    }

    /// The basis functional `(x, rr′|`: a unit entry at `(r, r′)` in sector `x`,
    /// carrying `1/w_k` on a continuum node.
    pub fn basis_functional(
        grid: Arc<SpectrumGrid>,
        qnums: Arc<QuantumNumbers>,
        sector: Sector,
        r: usize,
        r2: usize,
    ) -> Result<Self> {
        let d = qnums.len();
        if r >= d || r2 >= d {
            return Err(invalid("label", format!("index out of range for {d} labels")));
        }
        let mut b = Blocks::zeros(grid.len(), d);
        match sector {
            Sector::Bound => b.bound[(r, r2)] = C64::new(1.0, 0.0),
            Sector::Node(k) => {
                let Some(w) = grid.weights().get(k) else {
                    return Err(invalid("node", format!("{k} out of range")));
                };
                b.continuum[k][(r, r2)] = C64::new(1.0 / w, 0.0);
            }
        }
        Self::raw(grid, qnums, b)
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn qnums(&self) -> &Arc<QuantumNumbers> {
        &self.qnums
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn into_blocks(self) -> Blocks {
        self.blocks
    }

    fn context(&self) -> (&SpectrumGrid, &QuantumNumbers) {
        (&self.grid, &self.qnums)
    }

    /// Same grid and labels, new blocks (shape-checked only).
    pub fn with_blocks(&self, blocks: Blocks) -> Result<Self> {
        Self::raw(self.grid.clone(), self.qnums.clone(), blocks)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.blocks.scale(C64::new(s, 0.0));
        out
    }

    /// `(ρ|I)`
    pub fn trace(&self) -> f64 {
        let bound: f64 = self.blocks.bound.diagonal().iter().map(|z| z.re).sum();
        let cont: f64 = self
            .blocks
            .continuum
            .iter()
            .zip(self.grid.weights())
            .map(|(b, w)| w * b.diagonal().iter().map(|z| z.re).sum::<f64>())
            .sum();
        bound + cont
    }

    pub fn is_energy_diagonal(&self) -> bool {
        self.blocks.is_energy_diagonal()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_state(self)
    }
}

/// An observable. Self-adjointness is a checked property, not a constructor requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableFn {
    grid: Arc<SpectrumGrid>,
    qnums: Arc<QuantumNumbers>,
    blocks: Blocks,
}

impl ObservableFn {
    pub fn new(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>, blocks: Blocks) -> Result<Self> {
        blocks.check_shape(grid.len(), qnums.len())?;
        Ok(Self { grid, qnums, blocks })
    }

    pub fn identity(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>) -> Self {
        let d = qnums.len();
        let mut b = Blocks::zeros(grid.len(), d);
        b.bound = CMat::identity(d, d);
        b.continuum = vec![CMat::identity(d, d); grid.len()];
        Self { grid, qnums, blocks: b }
    }

    /// `H`: ω₀ on the bound level and ω_k on each node.
    pub fn hamiltonian(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>) -> Self {
        Self::energy_function(grid, qnums, |x| x)
    }

    /// `f(H)`, times the identity on the labels.
    pub fn energy_function(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>, f: impl Fn(f64) -> f64) -> Self {
        let d = qnums.len();
        let id = CMat::identity(d, d);
        let mut b = Blocks::zeros(grid.len(), d);
        b.bound = &id * C64::new(f(grid.omega0()), 0.0);
        b.continuum = grid.nodes().iter().map(|&x| &id * C64::new(f(x), 0.0)).collect();
        Self { grid, qnums, blocks: b }
    }

    /// An energy-diagonal observable from its two diagonal families.
    pub fn energy_diagonal(
        grid: Arc<SpectrumGrid>,
        qnums: Arc<QuantumNumbers>,
        bound: CMat,
        continuum: Vec<CMat>,
    ) -> Result<Self> {
        let mut b = Blocks::zeros(grid.len(), qnums.len());
        b.bound = bound;
        b.continuum = continuum;
        Self::new(grid, qnums, b)
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn qnums(&self) -> &Arc<QuantumNumbers> {
        &self.qnums
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn into_blocks(self) -> Blocks {
        self.blocks
    }

    pub fn with_blocks(&self, blocks: Blocks) -> Result<Self> {
        Self::new(self.grid.clone(), self.qnums.clone(), blocks)
    }

    pub fn adjoint(&self) -> Self {
        Self { grid: self.grid.clone(), qnums: self.qnums.clone(), blocks: self.blocks.adjoint() }
    }

    pub fn self_adjoint_defect(&self) -> f64 {
        self.blocks.hermiticity_defect()
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint_defect() <= HERMITICITY_TOL
    }

    pub fn is_energy_diagonal(&self) -> bool {
        self.blocks.is_energy_diagonal()
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: C64, other: &ObservableFn, b: C64) -> Result<Self> {
        same_context((&self.grid, &self.qnums), (&other.grid, &other.qnums))?;
        let mut blocks = self.blocks.clone();
        blocks.scale(a);
        blocks.axpy(b, &other.blocks);
        self.with_blocks(blocks)
    }

    /// Blockwise matrix power; only defined for energy-diagonal observables.
    pub fn diagonal_power(&self, n: u32) -> Result<Self> {
        if !self.is_energy_diagonal() {
            return Err(Error::NotEnergyDiagonal);
        }
        let d = self.qnums.len();
        let pow = |m: &CMat| (0..n).fold(CMat::identity(d, d), |acc, _| acc * m);
        let mut b = Blocks::zeros(self.grid.len(), d);
        b.bound = pow(&self.blocks.bound);
        b.continuum = self.blocks.continuum.iter().map(pow).collect();
        self.with_blocks(b)
    }
}

/// `(ρ|O)`.
pub fn dual_pairing(rho: &StateFn, o: &ObservableFn) -> Result<C64> {
    same_context(rho.context(), (&o.grid, &o.qnums))?;
    Ok(pair_blocks(&rho.blocks, &o.blocks, rho.grid.weights()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    /// Most negative diagonal entry, or 0.
    pub negativity_defect: f64,
    pub normalization_defect: f64,
}

impl ValidationReport {
    pub fn hermitian(&self) -> bool {
        self.hermiticity_defect <= HERMITICITY_TOL
    }

    pub fn nonnegative(&self) -> bool {
        self.negativity_defect >= NEGATIVITY_TOL
    }

    pub fn normalized(&self) -> bool {
        self.normalization_defect <= NORMALIZATION_TOL
    }

    pub fn passed(&self) -> bool {
        self.hermitian() && self.nonnegative() && self.normalized()
    }

    pub fn into_result(self) -> Result<()> {
        if !self.hermitian() {
            return Err(Error::NotHermitian { defect: self.hermiticity_defect, tolerance: HERMITICITY_TOL });
        }
        if !self.nonnegative() {
            return Err(Error::NegativeWeight { value: self.negativity_defect });
        }
        if !self.normalized() {
            return Err(Error::NotNormalized { value: self.normalization_defect });
        }
        Ok(())
    }
}

pub fn validate_state(rho: &StateFn) -> ValidationReport {
    let b = &rho.blocks;
    let lowest = std::iter::once(&b.bound)
        .chain(&b.continuum)
        .flat_map(|m| m.diagonal().iter().map(|z| z.re).collect::<Vec<_>>())
        .fold(0.0, f64::min);
    ValidationReport {
        hermiticity_defect: b.hermiticity_defect(),
        negativity_defect: lowest,
        normalization_defect: (rho.trace() - 1.0).abs(),
    }
}
