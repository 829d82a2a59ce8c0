//! Wigner transforms on a uniform position grid.
//!
//! A state with position kernel `K(q, q′) = ⟨q|ρ|q′⟩` maps to
//!
//! ```text
//! ρ^W(q, p) = (1/πħ) ∫ dλ K(q − λ, q + λ) e^{2iλp/ħ}
//! ```
//!
//! and an observable to `O^W(q, p) = ∫ dλ ⟨q − λ/2|O|q + λ/2⟩ e^{iλp/ħ}`.
//! Substituting `λ = 2μ` in the second, both read the kernel along the
//! antidiagonals `(q_i − q_m, q_i + q_m)` of the grid, so one DFT per row
//! serves both. With `p_j = jΔp` and `Δp = πħ/(NΔq)` the momentum grid is
//! exactly one period of the discrete transform, and
//!
//! ```text
//! ΔqΔp Σ ρ^W O^W = 2Δq² Σ_{a+b even} K(a, b) O(b, a)
//! ```
//!
//! which is the trapezoid trace on the even sublattice. It agrees with the
//! full trace whenever both kernels are resolved, `k_max Δq ≤ π/4`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dynamics::liouvillian_apply;
use crate::error::{invalid, Error, Result};
use crate::model::SpectralModel;
use crate::spectral::{Blocks, CMat, ObservableFn, SpectrumGrid, StateFn, HERMITICITY_TOL};

/// Largest kernel magnitude allowed on the grid boundary, relative to its maximum.
pub const DECAY_TOL: f64 = 1e-8;

/// `q_i = (i − n)Δq` and `p_j = (j − n)Δp` for `0 ≤ i, j < N = 2n + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceGrid {
    half_width: f64,
    n: usize,
    hbar: f64,
}

impl PhaseSpaceGrid {
    /// `points` must be odd (so that `q = 0` and `p = 0` are nodes) and at least 17.
    pub fn new(half_width: f64, points: usize, hbar: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half_width", format!("{half_width} must be positive")));
        }
        if points < 17 || points % 2 == 0 {
            return Err(invalid("points", format!("{points} must be odd and at least 17")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", format!("{hbar} must be positive")));
        }
        Ok(Self { half_width, n: points / 2, hbar })
    }

    /// The smallest odd grid on `[−L, L]` with spacing at most `dq`.
    pub fn with_spacing(half_width: f64, dq: f64, hbar: f64) -> Result<Self> {
        if !(dq > 0.0) {
            return Err(invalid("dq", format!("{dq} must be positive")));
        }
        let n = (half_width / dq).ceil().max(8.0) as usize;
        Self::new(half_width, 2 * n + 1, hbar)
    }

    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn center(&self) -> usize {
        self.n
    }

    pub fn dq(&self) -> f64 {
        self.half_width / self.n as f64
    }

    pub fn dp(&self) -> f64 {
        PI * self.hbar / (self.len() as f64 * self.dq())
    }

    pub fn p_max(&self) -> f64 {
        self.n as f64 * self.dp()
    }

    pub fn q(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) * self.dq()
    }

    pub fn p(&self, j: usize) -> f64 {
        (j as f64 - self.n as f64) * self.dp()
    }

    pub fn q_nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.q(i)).collect()
    }

    pub fn p_nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.p(j)).collect()
    }

    /// Requires `k_max Δq ≤ π/4` for `k_max = √(2ω_max)/ħ`.
    pub fn check_resolution(&self, omega_max: f64) -> Result<()> {
        let k = (2.0 * omega_max.max(0.0)).sqrt() / self.hbar;
        let dq = self.dq();
        if k * dq > PI / 4.0 {
            let n = (self.half_width * k / (PI / 4.0)).ceil() as usize;
            return Err(Error::Unresolved { wavenumber: k, spacing: dq, required_points: 2 * n + 1 });
        }
        Ok(())
    }
}

/// Kernel values `K(q_a, q_b)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionKernel {
    grid: PhaseSpaceGrid,
    values: CMat,
}

impl PositionKernel {
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &CMat {
        &self.values
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let k = &self.values;
        let mut worst: f64 = 0.0;
        for a in 0..k.nrows() {
            for b in a..k.ncols() {
                worst = worst.max((k[(a, b)] - k[(b, a)].conj()).norm());
            }
        }
        worst
    }

    /// `Δq Σ_a K(a, a)`
    pub fn trace(&self) -> f64 {
        self.grid.dq() * (0..self.values.nrows()).map(|a| self.values[(a, a)].re).sum::<f64>()
    }

    /// Largest `|K|` on the first or last row or column, relative to the largest `|K|`.
    pub fn boundary_decay(&self) -> f64 {
        let k = &self.values;
        let last = k.nrows() - 1;
        let peak = k.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = (0..=last)
            .flat_map(|a| [k[(0, a)], k[(last, a)], k[(a, 0)], k[(a, last)]])
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        edge / peak
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerDensity {
    grid: PhaseSpaceGrid,
    values: DMatrix<f64>,
    imag_residue: f64,
}

impl WignerDensity {
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    /// Row `i` is `q_i`, column `j` is `p_j`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Largest imaginary part discarded by the transform.
    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    /// `∫∫ W dq dp`
    pub fn normalization(&self) -> f64 {
        self.grid.dq() * self.grid.dp() * self.values.sum()
    }
}

/// A phase-space symbol `O^W` on the grid, including its constant part.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceTable {
    grid: PhaseSpaceGrid,
    values: DMatrix<f64>,
    constant: f64,
    imag_residue: f64,
}

impl PhaseSpaceTable {
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// The multiple of the identity split off before the transform.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }
}

/// Eigenfunctions sampled on the position grid, one column per spectral
/// coordinate: bound levels first, then `w_k ψ_{ω_k, m}` node by node.
struct Eigenbasis {
    phi: DMatrix<f64>,
    bound: Vec<Option<usize>>,
    dim: usize,
    n_bound: usize,
}

impl Eigenbasis {
    fn new(model: &impl SpectralModel, spectrum: &SpectrumGrid, grid: &PhaseSpaceGrid) -> Self {
        let dim = model.qnums().len();
        let q = grid.q_nodes();
        let mut bound = vec![None; dim];
        let mut n_bound = 0;
        for (m, slot) in bound.iter_mut().enumerate() {
            if model.bound(m, 0.0).is_some() {
                *slot = Some(n_bound);
                n_bound += 1;
            }
        }
        let bound_labels: Vec<usize> = (0..dim).filter(|&m| bound[m].is_some()).collect();
        let cols = n_bound + spectrum.len() * dim;
        let mut phi = DMatrix::zeros(q.len(), cols);
        let (nodes, weights) = (spectrum.nodes(), spectrum.weights());
        phi.as_mut_slice().par_chunks_mut(q.len()).enumerate().for_each(|(c, col)| {
            if c < n_bound {
                let m = bound_labels[c];
                for (v, &x) in col.iter_mut().zip(&q) {
                    *v = model.bound(m, x).unwrap_or(0.0);
                }
            } else {
                let (k, m) = ((c - n_bound) / dim, (c - n_bound) % dim);
                for (v, &x) in col.iter_mut().zip(&q) {
                    *v = weights[k] * model.continuum(m, nodes[k], x);
                }
            }
        });
        Self { phi, bound, dim, n_bound }
    }

    fn col(&self, k: usize, m: usize) -> usize {
        self.n_bound + k * self.dim + m
    }

    fn cols(&self) -> usize {
        self.phi.ncols()
    }
}

/// Coefficients `C` with `K = Φ C Φᵀ`, split into real and imaginary parts.
struct Coefficients {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    block_diagonal: bool,
}

/// How the energy-diagonal blocks enter the kernel.
enum Singular<'a> {
    /// A state: they must repeat the diagonal of the regular kernel.
    Redundant,
    /// An operator: they are `∫ O(ω)|ω⟩⟨ω|`, here minus `c·I`.
    Operator { weights: &'a [f64], constant: f64 },
    /// A derivative: they vanish.
    Absent,
}

fn coefficients(blocks: &Blocks, basis: &Eigenbasis, singular: Singular<'_>) -> Result<Coefficients> {
    let d = basis.dim;
    let n = blocks.n_nodes();
    let size = basis.cols();
    let mut re = DMatrix::zeros(size, size);
    let mut im = DMatrix::zeros(size, size);
    let mut put = |a: usize, b: usize, z: C64| {
        re[(a, b)] += z.re;
        im[(a, b)] += z.im;
    };
    let is_state = !matches!(singular, Singular::Operator { .. });
    let constant = match singular {
        Singular::Operator { constant, .. } => constant,
        _ => 0.0,
    };

    let stray = |z: C64| is_state && z.norm() > 0.0;
    for m in 0..d {
        for m2 in 0..d {
            let z = blocks.bound[(m, m2)] - if m == m2 { C64::new(constant, 0.0) } else { C64::new(0.0, 0.0) };
            match (basis.bound[m], basis.bound[m2]) {
                (Some(a), Some(b)) => put(a, b, z),
                _ if stray(blocks.bound[(m, m2)]) => {
                    return Err(invalid("state", format!("weight on label {m} or {m2}, which has no bound state")))
                }
                _ => {}
            }
        }
    }
    for k in 0..n {
        for m in 0..d {
            for m2 in 0..d {
                if let Some(b) = basis.bound[m2] {
                    put(basis.col(k, m), b, blocks.cont_bound[k][(m, m2)]);
                } else if stray(blocks.cont_bound[k][(m, m2)]) {
                    return Err(invalid("state", format!("coherence with label {m2}, which has no bound state")));
                }
                if let Some(a) = basis.bound[m] {
                    put(a, basis.col(k, m2), blocks.bound_cont[k][(m, m2)]);
                } else if stray(blocks.bound_cont[k][(m, m2)]) {
                    return Err(invalid("state", format!("coherence with label {m}, which has no bound state")));
                }
            }
        }
    }
    let mut block_diagonal = true;
    for k in 0..n {
        for l in 0..n {
            let b = blocks.cc(k, l);
            if k != l && b.iter().any(|z| z.norm() > 0.0) {
                block_diagonal = false;
            }
            for m in 0..d {
                for m2 in 0..d {
                    put(basis.col(k, m), basis.col(l, m2), b[(m, m2)]);
                }
            }
        }
    }
    if blocks.cont_bound.iter().chain(&blocks.bound_cont).any(|b| b.iter().any(|z| z.norm() > 0.0)) {
        block_diagonal = false;
    }

    match singular {
        Singular::Redundant => {
            let scale = blocks.continuum.iter().flat_map(|b| b.iter()).map(|z| z.norm()).fold(0.0, f64::max);
            let defect = (0..n)
                .map(|k| (&blocks.continuum[k] - blocks.cc(k, k)).iter().map(|z| z.norm()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if defect > 1e-10 * scale.max(1.0) {
                return Err(Error::NotTraceClass(format!(
                    "energy-diagonal blocks differ from the diagonal of the regular kernel by {defect:.3e}; \
                     a state with a singular continuum part has no position kernel"
                )));
            }
        }
        Singular::Operator { weights, constant } => {
            for (k, &w) in weights.iter().enumerate() {
                for m in 0..d {
                    for m2 in 0..d {
                        let mut z = blocks.continuum[k][(m, m2)];
                        if m == m2 {
                            z -= constant;
                        }
                        put(basis.col(k, m), basis.col(k, m2), z / w);
                    }
                }
            }
        }
        Singular::Absent => {}
    }
    Ok(Coefficients { re, im, block_diagonal })
}

impl Coefficients {
    /// `Φ C`, using the block structure when there are no energy coherences.
    fn left(&self, basis: &Eigenbasis, c: &DMatrix<f64>) -> DMatrix<f64> {
        if !self.block_diagonal {
            return &basis.phi * c;
        }
        let mut y = DMatrix::zeros(basis.phi.nrows(), c.ncols());
        let nb = basis.n_bound;
        let groups = std::iter::once((0, nb)).chain((0..(basis.cols() - nb) / basis.dim.max(1)).map(|k| {
            let s = nb + k * basis.dim;
            (s, s + basis.dim)
        }));
        for (s, e) in groups.filter(|(s, e)| e > s) {
            let phi = basis.phi.columns(s, e - s);
            let block = c.view((s, s), (e - s, e - s));
            y.columns_mut(s, e - s).copy_from(&(phi * block));
        }
        y
    }

    fn kernel(&self, basis: &Eigenbasis) -> CMat {
        let phi_t = basis.phi.transpose();
        let half = |c: &DMatrix<f64>| -> Option<DMatrix<f64>> {
            c.iter().any(|&v| v != 0.0).then(|| self.left(basis, c) * &phi_t)
        };
        let (re, im) = (half(&self.re), half(&self.im));
        let n = basis.phi.nrows();
        CMat::from_fn(n, n, |a, b| {
            C64::new(re.as_ref().map_or(0.0, |m| m[(a, b)]), im.as_ref().map_or(0.0, |m| m[(a, b)]))
        })
    }
}

fn check_model(
    model: &impl SpectralModel,
    spectrum: &SpectrumGrid,
    qnums: &crate::spectral::QuantumNumbers,
    grid: &PhaseSpaceGrid,
) -> Result<()> {
    if &model.qnums() != qnums || (model.omega0() - spectrum.omega0()).abs() > 1e-12 * model.omega0().abs().max(1.0) {
        return Err(Error::GridMismatch);
    }
    if (model.hbar() - grid.hbar()).abs() > 1e-15 * model.hbar() {
        return Err(invalid("hbar", format!("model uses {} but the grid {}", model.hbar(), grid.hbar())));
    }
    grid.check_resolution(spectrum.omega_max())
}

/// `K(q, q′) = ⟨q|ρ|q′⟩` from the regular blocks of `ρ`.
pub fn position_kernel(rho: &StateFn, model: &impl SpectralModel, grid: &PhaseSpaceGrid) -> Result<PositionKernel> {
    check_model(model, rho.grid(), rho.qnums(), grid)?;
    let basis = Eigenbasis::new(model, rho.grid(), grid);
    let c = coefficients(rho.blocks(), &basis, Singular::Redundant)?;
    Ok(PositionKernel { grid: *grid, values: c.kernel(&basis) })
}

/// Kernel of `dρ/dt = −i[H, ρ]` in units where time carries `ħ = 1`.
pub fn derivative_kernel(rho: &StateFn, model: &impl SpectralModel, grid: &PhaseSpaceGrid) -> Result<PositionKernel> {
    check_model(model, rho.grid(), rho.qnums(), grid)?;
    let basis = Eigenbasis::new(model, rho.grid(), grid);
    let c = coefficients(liouvillian_apply(rho).blocks(), &basis, Singular::Absent)?;
    Ok(PositionKernel { grid: *grid, values: c.kernel(&basis) })
}

/// The constant `c` such that `O − c·I` has no spectral weight at the top of
/// the grid: the common value of the energy-diagonal blocks on the last panel
/// when they are all the same multiple of the identity, otherwise zero.
fn identity_tail(o: &ObservableFn) -> f64 {
    let order = o.grid().panel_order();
    let blocks = &o.blocks().continuum;
    let Some(last) = blocks.last() else { return 0.0 };
    let c = last[(0, 0)].re;
    let d = last.nrows();
    let tol = 1e-12 * c.abs().max(1.0);
    let scalar = |b: &CMat| {
        (0..d).all(|m| (0..d).all(|m2| (b[(m, m2)] - if m == m2 { c } else { 0.0 }).norm() <= tol))
    };
    if blocks[blocks.len().saturating_sub(order)..].iter().all(scalar) {
        c
    } else {
        0.0
    }
}

/// `⟨q|O − c·I|q′⟩` and `c`; see [`wigner_observable`].
pub fn observable_kernel(
    o: &ObservableFn,
    model: &impl SpectralModel,
    grid: &PhaseSpaceGrid,
) -> Result<(PositionKernel, f64)> {
    check_model(model, o.grid(), o.qnums(), grid)?;
    let constant = identity_tail(o);
    let basis = Eigenbasis::new(model, o.grid(), grid);
    let c = coefficients(o.blocks(), &basis, Singular::Operator { weights: o.grid().weights(), constant })?;
    Ok((PositionKernel { grid: *grid, values: c.kernel(&basis) }, constant))
}

/// `scale · Σ_m K(i − m, i + m) e^{2πim(j − n)/N}` for every row `i`.
fn antidiagonal_transform(k: &CMat, grid: &PhaseSpaceGrid, scale: f64) -> (DMatrix<f64>, f64) {
    let n_pts = grid.len();
    let n = grid.center();
    let fft = FftPlanner::new().plan_fft_inverse(n_pts);
    let shift: Vec<C64> = (0..n_pts)
        .map(|m| C64::from_polar(1.0, -2.0 * PI * (m * n % n_pts) as f64 / n_pts as f64))
        .collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..n_pts)
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![C64::new(0.0, 0.0); n_pts];
            let reach = i.min(n_pts - 1 - i);
            buf[0] = k[(i, i)];
            for m in 1..=reach {
                buf[m] = k[(i - m, i + m)] * shift[m];
                let neg = n_pts - m;
                buf[neg] = k[(i + m, i - m)] * shift[neg];
            }
            fft.process(&mut buf);
            let residue = buf.iter().map(|z| (scale * z.im).abs()).fold(0.0, f64::max);
            (buf.iter().map(|z| scale * z.re).collect(), residue)
        })
        .collect();
    let residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    (DMatrix::from_fn(n_pts, n_pts, |i, j| rows[i].0[j]), residue)
}

/// `ρ^W` from a kernel that has decayed at the grid boundary.
pub fn wigner_state(kernel: &PositionKernel) -> Result<WignerDensity> {
    let decay = kernel.boundary_decay();
    if decay > DECAY_TOL {
        return Err(Error::KernelDecay { value: decay });
    }
    let grid = kernel.grid;
    let (values, imag_residue) = antidiagonal_transform(&kernel.values, &grid, grid.dq() / (PI * grid.hbar()));
    Ok(WignerDensity { grid, values, imag_residue })
}

/// `ρ^W(q_i, p)` at any momentum, without forming the full kernel.
pub fn wigner_state_at(
    rho: &StateFn,
    model: &impl SpectralModel,
    grid: &PhaseSpaceGrid,
    i: usize,
    p: f64,
) -> Result<f64> {
    if i >= grid.len() {
        return Err(invalid("i", format!("row {i} outside a grid of {}", grid.len())));
    }
    check_model(model, rho.grid(), rho.qnums(), grid)?;
    let basis = Eigenbasis::new(model, rho.grid(), grid);
    let c = coefficients(rho.blocks(), &basis, Singular::Redundant)?;
    let (yr, yi) = (c.left(&basis, &c.re), c.left(&basis, &c.im));
    let entry = |a: usize, b: usize| {
        let row = basis.phi.row(b);
        C64::new(yr.row(a).dot(&row), yi.row(a).dot(&row))
    };
    let reach = i.min(grid.len() - 1 - i);
    let peak = entry(i, i).norm();
    let ends = entry(i - reach, i + reach).norm().max(entry(i + reach, i - reach).norm());
    if peak > 0.0 && ends / peak > DECAY_TOL {
        return Err(Error::KernelDecay { value: ends / peak });
    }
    let dq = grid.dq();
    let mut sum = entry(i, i).re;
    for m in 1..=reach {
        let phase = C64::from_polar(1.0, 2.0 * m as f64 * dq * p / grid.hbar());
        sum += 2.0 * (entry(i - m, i + m) * phase).re;
    }
    Ok(dq / (PI * grid.hbar()) * sum)
}

/// `O^W = c + (O − c·I)^W`, where `c` is the value the energy-diagonal part of
/// `O` settles to on the last panel (so that `I^W ≡ 1` exactly). Any other
/// spectral content must be confined below `ω_max`.
pub fn wigner_observable(o: &ObservableFn, model: &impl SpectralModel, grid: &PhaseSpaceGrid) -> Result<PhaseSpaceTable> {
    let defect = o.self_adjoint_defect();
    if defect > HERMITICITY_TOL {
        return Err(Error::NotHermitian { defect, tolerance: HERMITICITY_TOL });
    }
    let (kernel, constant) = observable_kernel(o, model, grid)?;
    let (mut values, imag_residue) = antidiagonal_transform(&kernel.values, grid, 2.0 * grid.dq());
    values.add_scalar_mut(constant);
    Ok(PhaseSpaceTable { grid: *grid, values, constant, imag_residue })
}

/// `∫∫ ρ^W O^W dq dp`
pub fn phase_space_pairing(w: &WignerDensity, o: &PhaseSpaceTable) -> Result<f64> {
    if w.grid != o.grid {
        return Err(Error::GridMismatch);
    }
    Ok(w.grid.dq() * w.grid.dp() * w.values.dot(&o.values))
}

/// Rows entering residual norms: `q_cut ≤ |q| ≤ q_outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub q_cut: f64,
    pub q_outer: f64,
}

impl Window {
    /// Two cells around the origin, the whole grid otherwise.
    pub fn around_origin(grid: &PhaseSpaceGrid) -> Self {
        Self { q_cut: 2.0 * grid.dq(), q_outer: grid.half_width() }
    }

    fn rows(&self, grid: &PhaseSpaceGrid) -> Vec<usize> {
        let eps = 1e-9 * grid.dq();
        (2..grid.len() - 2)
            .filter(|&i| {
                let q = grid.q(i).abs();
                q + eps >= self.q_cut && q <= self.q_outer + eps
            })
            .collect()
    }

    /// `(ΔqΔp Σ_{rows} Σ_j f²)^{1/2}`
    pub fn norm(&self, grid: &PhaseSpaceGrid, f: &DMatrix<f64>) -> f64 {
        let s: f64 = self.rows(grid).iter().map(|&i| f.row(i).norm_squared()).sum();
        (grid.dq() * grid.dp() * s).sqrt()
    }
}

/// Both sides of the Liouville correspondence on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleComparison {
    pub grid: PhaseSpaceGrid,
    /// `(1/ħ)·[−i[H, ρ]]^W`
    pub quantum: DMatrix<f64>,
    /// `{H^W, ρ^W} = −p ∂_q ρ^W` off the origin
    pub classical: DMatrix<f64>,
    pub residual: f64,
    pub quantum_norm: f64,
    pub classical_norm: f64,
}

/// Compares the Wigner transform of `dρ/dt` with the classical Liouville flow
/// of `ρ^W` for `H = p²/2 + V(q)` with `V` supported at the origin, where the
/// force vanishes outside the window. `∂_q` is the fourth-order centred difference.
pub fn moyal_vs_poisson(
    rho: &StateFn,
    model: &impl SpectralModel,
    grid: &PhaseSpaceGrid,
    window: &Window,
) -> Result<LiouvilleComparison> {
    let w = wigner_state(&position_kernel(rho, model, grid)?)?;
    let dk = derivative_kernel(rho, model, grid)?;
    let (mut quantum, _) = antidiagonal_transform(&dk.values, grid, grid.dq() / (PI * grid.hbar()));
    quantum /= grid.hbar();
    let n = grid.len();
    let dq = grid.dq();
    let f = &w.values;
    let classical = DMatrix::from_fn(n, n, |i, j| {
        if i < 2 || i + 2 >= n {
            return 0.0;
        }
        let d = (-f[(i + 2, j)] + 8.0 * f[(i + 1, j)] - 8.0 * f[(i - 1, j)] + f[(i - 2, j)]) / (12.0 * dq);
        -grid.p(j) * d
    });
    let residual = window.norm(grid, &(&quantum - &classical));
    Ok(LiouvilleComparison {
        grid: *grid,
        quantum_norm: window.norm(grid, &quantum),
        classical_norm: window.norm(grid, &classical),
        quantum,
        classical,
        residual,
    })
}

/// `O₁O₂` for energy-diagonal operators, block by block.
pub fn diagonal_product(o1: &ObservableFn, o2: &ObservableFn) -> Result<ObservableFn> {
    if !(o1.is_energy_diagonal() && o2.is_energy_diagonal()) {
        return Err(Error::NotEnergyDiagonal);
    }
    if o1.grid() != o2.grid() || o1.qnums() != o2.qnums() {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (o1.blocks(), o2.blocks());
    let mut blocks = Blocks::zeros(a.n_nodes(), a.dim());
    blocks.bound = &a.bound * &b.bound;
    blocks.continuum = a.continuum.iter().zip(&b.continuum).map(|(x, y)| x * y).collect();
    o1.with_blocks(blocks)
}

/// `‖(O₁O₂)^W − O₁^W O₂^W‖` over the window.
pub fn product_correspondence(
    o1: &ObservableFn,
    o2: &ObservableFn,
    model: &impl SpectralModel,
    grid: &PhaseSpaceGrid,
    window: &Window,
) -> Result<f64> {
    let product = diagonal_product(o1, o2)?;
    let s12 = wigner_observable(&product, model, grid)?;
    let s1 = wigner_observable(o1, model, grid)?;
    let square = std::ptr::eq(o1, o2);
    let s2 = if square { None } else { Some(wigner_observable(o2, model, grid)?) };
    let s2 = s2.as_ref().unwrap_or(&s1);
    Ok(window.norm(grid, &(s12.values - s1.values.component_mul(&s2.values))))
}

/// Residuals at several `ħ` and the least-squares slope of `log r` against `log ħ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub hbars: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

pub fn hbar_scaling(hbars: &[f64], residual: impl Fn(f64) -> Result<f64>) -> Result<ScalingReport> {
    if hbars.len() < 2 {
        return Err(invalid("hbar", "need at least two values of hbar"));
    }
    let residuals = hbars.iter().map(|&h| residual(h)).collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(hbars, &residuals)?;
    Ok(ScalingReport { hbars: hbars.to_vec(), residuals, slope })
}

pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("fit", "need at least two paired samples"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(invalid("fit", "log-log fit needs positive samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit", "all hbar values coincide"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::DeltaWell;
    use crate::spectral::{dual_pairing, QuantumNumbers};

    fn bound_state(m: &DeltaWell, spectrum: SpectrumGrid) -> StateFn {
        let mut b = Blocks::zeros(spectrum.len(), 2);
        b.bound[(0, 0)] = C64::new(1.0, 0.0);
        StateFn::new(Arc::new(spectrum), Arc::new(m.qnums()), b).unwrap()
    }

    fn packet(hbar: f64) -> (DeltaWell, StateFn, PhaseSpaceGrid) {
        let m = DeltaWell::with_hbar(1.0, hbar).unwrap();
        let p = m.band_limited_packet(1.5, 0.5 * hbar.sqrt(), 8.0, 4.0 + 6.0 * hbar).unwrap();
        let rho = StateFn::pure(Arc::new(p.spectrum), Arc::new(m.qnums()), &p.amplitudes).unwrap();
        (m, rho, p.grid)
    }

    #[test]
    fn bound_state_origin_value_matches_brute_force() {
        let g = 1.0;
        let n = 100_000;
        let (a, b) = (-20.0, 20.0);
        let h = (b - a) / n as f64;
        let f = |l: f64| g * (-2.0 * g * f64::abs(l)).exp() / PI;
        let oracle: f64 = h * ((1..n).map(|i| f(a + i as f64 * h)).sum::<f64>() + 0.5 * (f(a) + f(b)));

        let m = DeltaWell::new(g).unwrap();
        let rho = bound_state(&m, m.spectrum_grid(1.0, 1, 4).unwrap());
        let grid = PhaseSpaceGrid::new(9.5, 8193, 1.0).unwrap();
        let w = wigner_state_at(&rho, &m, &grid, grid.center(), 0.0).unwrap();
        assert!((w - oracle).abs() < 1e-6, "{w} vs {oracle}");
    }

    #[test]
    fn identity_symbol_is_one_and_combinations_are_linear() {
        let m = DeltaWell::with_hbar(1.0, 0.5).unwrap();
        let sg = Arc::new(m.momentum_grid(60.0, 60, 16).unwrap());
        let q = Arc::new(m.qnums());
        let grid = PhaseSpaceGrid::with_spacing(6.0, 0.99 * PI / 4.0 * 0.5 / 120f64.sqrt(), 0.5).unwrap();
        let id = wigner_observable(&ObservableFn::identity(sg.clone(), q.clone()), &m, &grid).unwrap();
        assert!(id.values().iter().all(|&v| v == 1.0));

        let a = ObservableFn::energy_function(sg.clone(), q.clone(), |w| w * (-w.max(0.0) / 2.0).exp());
        let b = ObservableFn::energy_function(sg.clone(), q.clone(), |w| (-w.max(0.0) / 2.0).exp());
        let ab = a.combine(C64::new(2.0, 0.0), &b, C64::new(-3.0, 0.0)).unwrap();
        let (sa, sb, sab) = (
            wigner_observable(&a, &m, &grid).unwrap(),
            wigner_observable(&b, &m, &grid).unwrap(),
            wigner_observable(&ab, &m, &grid).unwrap(),
        );
        let defect = (sab.values() - (sa.values() * 2.0 - sb.values() * 3.0)).amax();
        assert!(defect < 1e-12 * sab.values().amax());
        assert!(sa.imag_residue() < 1e-10);

        let i = grid.center() + (3.0 / grid.dq()).round() as usize;
        for j in 0..grid.len() {
            let w = 0.5 * grid.p(j).powi(2);
            assert!((sa.values()[(i, j)] - w * (-w / 2.0).exp()).abs() < 1e-6, "p = {}", grid.p(j));
        }
    }

    #[test]
    fn bound_state_energy_from_phase_space() {
        let m = DeltaWell::new(1.0).unwrap();
        let sg = m.spectrum_grid(50.0, 100, 16).unwrap();
        let rho = bound_state(&m, sg.clone());
        let grid = PhaseSpaceGrid::new(20.0, 3001, 1.0).unwrap();
        let h = ObservableFn::hamiltonian(Arc::new(sg), Arc::new(m.qnums()));
        let w = wigner_state(&position_kernel(&rho, &m, &grid).unwrap()).unwrap();
        let e = phase_space_pairing(&w, &wigner_observable(&h, &m, &grid).unwrap()).unwrap();
        assert!((e + 0.5).abs() < 1e-3, "{e}");
    }

    #[test]
    fn packet_density_is_real_normalized_and_pairs_like_the_state() {
        let m = DeltaWell::new(1.0).unwrap();
        let p = m.band_limited_packet(5.0, 1.0, 5.0, 14.5).unwrap();
        let rho = StateFn::pure(Arc::new(p.spectrum), Arc::new(m.qnums()), &p.amplitudes).unwrap();
        let grid = p.grid;
        let k = position_kernel(&rho, &m, &grid).unwrap();
        assert!(k.hermiticity_defect() < 1e-10);
        assert!((k.trace() - 1.0).abs() < 1e-6);
        let w = wigner_state(&k).unwrap();
        assert!(w.imag_residue() < 1e-10);
        assert!((w.normalization() - 1.0).abs() < 1e-6);
        let f = ObservableFn::energy_function(rho.grid().clone(), rho.qnums().clone(), |x| (-(x - 12.0).powi(2) / 50.0).exp());
        let quantum = dual_pairing(&rho, &f).unwrap().re;
        let classical = phase_space_pairing(&w, &wigner_observable(&f, &m, &grid).unwrap()).unwrap();
        assert!((quantum - classical).abs() < 1e-4, "{quantum} vs {classical}");
    }

    #[test]
    fn stationary_state_has_no_flow() {
        let m = DeltaWell::with_hbar(1.0, 0.25).unwrap();
        let rho = bound_state(&m, m.spectrum_grid(1.0, 4, 8).unwrap());
        let grid = PhaseSpaceGrid::new(3.0, 401, 0.25).unwrap();
        let c = moyal_vs_poisson(&rho, &m, &grid, &Window { q_cut: 1.0, q_outer: 3.0 }).unwrap();
        assert_eq!(c.quantum_norm, 0.0);
        assert!(c.residual < 1e-6);
    }

    #[test]
    fn flow_residual_shrinks_with_hbar() {
        let residual = |h: f64| {
            let (m, rho, grid) = packet(h);
            let window = Window { q_cut: 0.5, q_outer: grid.half_width() };
            Ok(moyal_vs_poisson(&rho, &m, &grid, &window)?.residual)
        };
        let report = hbar_scaling(&[1.0, 0.5], residual).unwrap();
        assert!(report.slope >= 0.9, "{report:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = DeltaWell::new(1.0).unwrap();
        let sg = Arc::new(m.spectrum_grid(20.0, 10, 8).unwrap());
        let q = Arc::new(m.qnums());
        let coarse = PhaseSpaceGrid::new(20.0, 101, 1.0).unwrap();
        let rho = bound_state(&m, (*sg).clone());
        assert!(matches!(position_kernel(&rho, &m, &coarse), Err(Error::Unresolved { .. })));

        let grid = PhaseSpaceGrid::new(20.0, 401, 1.0).unwrap();
        let cont = vec![CMat::identity(2, 2) * C64::new(0.05, 0.0); sg.len()];
        let smooth = StateFn::energy_diagonal(sg.clone(), q.clone(), CMat::zeros(2, 2), cont).unwrap();
        assert!(matches!(position_kernel(&smooth, &m, &grid), Err(Error::NotTraceClass(_))));

        let (m2, packet, small) = packet(1.0);
        let cramped = PhaseSpaceGrid::new(2.0, small.len() / 5 | 1, 1.0).unwrap();
        let k = position_kernel(&packet, &m2, &cramped).unwrap();
        assert!(matches!(wigner_state(&k), Err(Error::KernelDecay { .. })));

        let other = PhaseSpaceGrid::new(20.0, 403, 1.0).unwrap();
        let w = wigner_state(&position_kernel(&rho, &m, &grid).unwrap()).unwrap();
        let id = wigner_observable(&ObservableFn::identity(sg.clone(), q.clone()), &m, &other).unwrap();
        assert!(matches!(phase_space_pairing(&w, &id), Err(Error::GridMismatch)));

        let mut b = Blocks::zeros(sg.len(), 2);
        b.cc_mut(0, 1)[(0, 0)] = C64::new(1.0, 0.0);
        b.cc_mut(1, 0)[(0, 0)] = C64::new(1.0, 0.0);
        let coherent = ObservableFn::new(sg.clone(), q.clone(), b).unwrap();
        let h = ObservableFn::hamiltonian(sg, q);
        assert!(matches!(diagonal_product(&coherent, &h), Err(Error::NotEnergyDiagonal)));
        assert!(hbar_scaling(&[1.0], |_| Ok(1.0)).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [1.0, 0.5, 0.25];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn grid_geometry() {
        let g = PhaseSpaceGrid::new(4.0, 33, 0.5).unwrap();
        assert_eq!(g.q(g.center()), 0.0);
        assert!((g.q(32) - 4.0).abs() < 1e-15);
        assert!((g.dp() * g.dq() * 33.0 - PI * 0.5).abs() < 1e-12);
        assert!(PhaseSpaceGrid::new(4.0, 32, 1.0).is_err());
        assert!(PhaseSpaceGrid::new(4.0, 15, 1.0).is_err());
        let _ = QuantumNumbers::parity();
    }
}
