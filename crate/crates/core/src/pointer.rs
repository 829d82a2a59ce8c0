//! The pointer basis: unitaries `U(x)` that diagonalize the energy-diagonal
//! blocks of a state, and the observables that are diagonal in that basis.
//!
//! A block at energies `(x, x′)` transforms as `U(x)† B U(x′)`, for states and
//! observables alike; this leaves `(ρ|O)` unchanged.
//!
//! Eigenvalues are sorted descending at every node. Between adjacent
//! continuum nodes the eigenvectors are matched greedily by overlap; the match
//! must pair each vector with the one of the same rank and overlap ≥ 0.5,
//! otherwise a level crossing or an under-resolved grid is reported.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{
    dual_pairing, max_abs, Blocks, CMat, ObservableFn, QuantumNumbers, Sector, SpectrumGrid, StateFn,
    HERMITICITY_TOL,
};

pub const TRACKING_THRESHOLD: f64 = 0.5;
pub const DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PointerTransform {
    grid: Arc<SpectrumGrid>,
    qnums: Arc<QuantumNumbers>,
    bound: CMat,
    continuum: Vec<CMat>,
    bound_eigenvalues: Vec<f64>,
    continuum_eigenvalues: Vec<Vec<f64>>,
    min_overlap: f64,
}

impl PointerTransform {
    pub fn identity(grid: Arc<SpectrumGrid>, qnums: Arc<QuantumNumbers>) -> Self {
        let d = qnums.len();
        let n = grid.len();
        Self {
            bound: CMat::identity(d, d),
            continuum: vec![CMat::identity(d, d); n],
            bound_eigenvalues: vec![0.0; d],
            continuum_eigenvalues: vec![vec![0.0; d]; n],
            min_overlap: 1.0,
            grid,
            qnums,
        }
    }

    pub fn grid(&self) -> &Arc<SpectrumGrid> {
        &self.grid
    }

    pub fn qnums(&self) -> &Arc<QuantumNumbers> {
        &self.qnums
    }

    pub fn unitary(&self, sector: Sector) -> &CMat {
        match sector {
            Sector::Bound => &self.bound,
            Sector::Node(k) => &self.continuum[k],
        }
    }

    pub fn eigenvalues(&self, sector: Sector) -> &[f64] {
        match sector {
            Sector::Bound => &self.bound_eigenvalues,
            Sector::Node(k) => &self.continuum_eigenvalues[k],
        }
    }

    /// Smallest `|⟨u_r(ω_k)|u_r(ω_{k+1})⟩|` over ranks and adjacent nodes.
    pub fn min_overlap(&self) -> f64 {
        self.min_overlap
    }

    /// `max_x ‖U(x)†U(x) − I‖_max`
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.qnums.len();
        std::iter::once(&self.bound)
            .chain(&self.continuum)
            .map(|u| max_abs(&(u.adjoint() * u - CMat::identity(d, d))))
            .fold(0.0, f64::max)
    }

    fn conjugate(&self, b: &Blocks) -> Blocks {
        let u = |x: usize| if x == usize::MAX { &self.bound } else { &self.continuum[x] };
        let n = self.grid.len();
        let sandwich = |a: usize, m: &CMat, c: usize| u(a).adjoint() * m * u(c);
        let b0 = usize::MAX;
        let mut cont_cont = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                cont_cont.push(sandwich(k, b.cc(k, l), l));
            }
        }
        Blocks {
            bound: sandwich(b0, &b.bound, b0),
            continuum: b.continuum.iter().enumerate().map(|(k, m)| sandwich(k, m, k)).collect(),
            cont_bound: b.cont_bound.iter().enumerate().map(|(k, m)| sandwich(k, m, b0)).collect(),
            bound_cont: b.bound_cont.iter().enumerate().map(|(k, m)| sandwich(b0, m, k)).collect(),
            cont_cont,
        }
    }
}

fn check_context(u: &PointerTransform, grid: &SpectrumGrid, qnums: &QuantumNumbers) -> Result<()> {
    if *u.grid != *grid || *u.qnums != *qnums {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Eigenpairs sorted descending, degenerate clusters resolved, phases fixed.
fn eigen_sorted(a: &CMat, secondary: Option<&CMat>) -> (Vec<f64>, CMat) {
    let d = a.nrows();
    let (raw_values, raw_vectors) = jacobi_polish(a, a.clone().symmetric_eigen().eigenvectors);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| raw_values[j].total_cmp(&raw_values[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| raw_values[i]).collect();
    let mut vectors = CMat::from_columns(&order.iter().map(|&i| raw_vectors.column(i).into_owned()).collect::<Vec<_>>());

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (values[start] - values[end]).abs() <= DEGENERACY_RTOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let cluster = vectors.columns(start, end - start).into_owned();
            let resolved = resolve_cluster(&cluster, secondary);
            vectors.columns_mut(start, end - start).copy_from(&resolved);
        }
        start = end;
    }
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for i in 1..d {
            if col[i].norm() > col[best].norm() * (1.0 + 1e-12) {
                best = i;
            }
        }
        let phase = col[best].conj() / col[best].norm();
        col *= phase;
    }
    (values, vectors)
}

/// Cyclic Jacobi sweeps on `V†AV` until its off-diagonal part is at round-off
/// relative to the largest entry of `A`. The QR eigensolver alone loses the
/// rotation angle of nearly diagonal blocks with a large diagonal spread.
fn jacobi_polish(a: &CMat, mut v: CMat) -> (Vec<f64>, CMat) {
    let d = a.nrows();
    let mut b = v.adjoint() * a * &v;
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for _ in 0..16 {
        let off = (0..d).flat_map(|p| (p + 1..d).map(move |q| (p, q))).map(|pq| b[pq].norm()).fold(0.0, f64::max);
        if off <= 1e-3 * f64::EPSILON * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = b[(p, q)].norm();
                if apq == 0.0 {
                    continue;
                }
                let phase = b[(p, q)] / apq;
                let tau = (b[(q, q)].re - b[(p, p)].re) / (2.0 * apq);
                let t = if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                    sign / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let mut j = CMat::identity(d, d);
                j[(p, p)] = C64::new(c, 0.0);
                j[(p, q)] = C64::new(s, 0.0);
                j[(q, p)] = -phase.conj() * s;
                j[(q, q)] = phase.conj() * c;
                b = j.adjoint() * &b * &j;
                v = &v * &j;
            }
        }
    }
    ((0..d).map(|i| b[(i, i)].re).collect(), v)
}

/// An orthonormal basis of `span(v)` chosen by the secondary matrix, then by
/// Gram–Schmidt on the projected unit vectors `e_0, e_1, …`.
fn resolve_cluster(v: &CMat, secondary: Option<&CMat>) -> CMat {
    let c = v.ncols();
    if let Some(s) = secondary {
        let reduced = v.adjoint() * s * v;
        let reduced = (&reduced + reduced.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = eigen_sorted(&reduced, None);
        let spread = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let distinct = vals.windows(2).all(|p| (p[0] - p[1]).abs() > DEGENERACY_RTOL * spread);
        if distinct {
            return v * vecs;
        }
    }
    let projector = v * v.adjoint();
    let d = v.nrows();
    let mut chosen: Vec<DVector<C64>> = Vec::with_capacity(c);
    for i in 0..d {
        if chosen.len() == c {
            break;
        }
        let mut x = projector.column(i).into_owned();
        for q in &chosen {
            let proj = q.dotc(&x);
            x -= q * proj;
        }
        let norm = x.norm();
        if norm > 1e-8 {
            chosen.push(x / C64::new(norm, 0.0));
        }
    }
    CMat::from_columns(&chosen)
}

/// Tracked eigendecomposition of `ρ(ω₀)` and every `ρ(ω_k)`.
///
/// `secondary`, when given, must be energy-diagonal; its diagonal block at
/// each sector splits degenerate eigenvalue clusters.
pub fn diagonalize_blocks(rho: &StateFn, secondary: Option<&ObservableFn>) -> Result<PointerTransform> {
    let blocks = rho.blocks();
    let diag_defect = std::iter::once(&blocks.bound)
        .chain(&blocks.continuum)
        .map(|m| max_abs(&(m - m.adjoint())))
        .fold(0.0, f64::max);
    if diag_defect > HERMITICITY_TOL {
        return Err(Error::NotHermitian { defect: diag_defect, tolerance: HERMITICITY_TOL });
    }
    if let Some(s) = secondary {
        if s.grid() != rho.grid() || s.qnums() != rho.qnums() {
            return Err(Error::GridMismatch);
        }
        if !s.is_energy_diagonal() {
            return Err(Error::NotEnergyDiagonal);
        }
    }
    let sec = |sector: Sector| secondary.map(|s| s.blocks().diagonal_block(sector));

    let (bound_eigenvalues, bound) = eigen_sorted(&blocks.bound, sec(Sector::Bound));
    let per_node: Vec<(Vec<f64>, CMat)> = (0..rho.grid().len())
        .into_par_iter()
        .map(|k| eigen_sorted(&blocks.continuum[k], sec(Sector::Node(k))))
        .collect();

    let mut min_overlap = 1.0f64;
    for k in 1..per_node.len() {
        let overlap = per_node[k - 1].1.adjoint() * &per_node[k].1;
        let d = overlap.nrows();
        let mut free_rows = vec![true; d];
        let mut free_cols = vec![true; d];
        for _ in 0..d {
            let mut best = (0, 0, -1.0);
            for i in (0..d).filter(|&i| free_rows[i]) {
                for j in (0..d).filter(|&j| free_cols[j]) {
                    let o = overlap[(i, j)].norm();
                    if o > best.2 {
                        best = (i, j, o);
                    }
                }
            }
            let (i, j, o) = best;
            if i != j || o < TRACKING_THRESHOLD {
                return Err(Error::Tracking { node: k, overlap: overlap[(i, i)].norm() });
            }
            free_rows[i] = false;
            free_cols[j] = false;
            min_overlap = min_overlap.min(o);
        }
    }
    let (continuum_eigenvalues, continuum) = per_node.into_iter().unzip();
    Ok(PointerTransform {
        grid: rho.grid().clone(),
        qnums: rho.qnums().clone(),
        bound,
        continuum,
        bound_eigenvalues,
        continuum_eigenvalues,
        min_overlap,
    })
}

pub fn transform_state(rho: &StateFn, u: &PointerTransform) -> Result<StateFn> {
    check_context(u, rho.grid(), rho.qnums())?;
    rho.with_blocks(u.conjugate(rho.blocks()))
}

pub fn transform_observable(o: &ObservableFn, u: &PointerTransform) -> Result<ObservableFn> {
    check_context(u, o.grid(), o.qnums())?;
    o.with_blocks(u.conjugate(o.blocks()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Original,
    Pointer,
}

/// One observable per label axis `i`, equal to `r_i` on pointer label `r`.
pub fn pointer_observables(u: &PointerTransform, basis: Basis) -> Vec<ObservableFn> {
    let q = &u.qnums;
    (0..q.n_axes())
        .map(|i| {
            let diag = CMat::from_diagonal(&DVector::from_iterator(
                q.len(),
                q.labels().iter().map(|l| C64::new(l[i] as f64, 0.0)),
            ));
            let express = |m: &CMat| match basis {
                Basis::Pointer => diag.clone(),
                Basis::Original => m * &diag * m.adjoint(),
            };
            let bound = express(&u.bound);
            let continuum = u.continuum.iter().map(express).collect();
            ObservableFn::energy_diagonal(u.grid.clone(), u.qnums.clone(), bound, continuum)
                .expect("pointer observable shapes follow the transform")
        })
        .collect()
}

/// `(x, rr|Oⁿ)` with the basis functional in the basis `O` is written in.
pub fn moment_check(o: &ObservableFn, sector: Sector, r: usize, n: u32) -> Result<f64> {
    let power = o.diagonal_power(n)?;
    let functional = StateFn::basis_functional(o.grid().clone(), o.qnums().clone(), sector, r, r)?;
    Ok(dual_pairing(&functional, &power)?.re)
}

/// `(ρ*|[P, O])` with the commutator formed blockwise:
/// `P(x)·O(x, x′) − O(x, x′)·P(x′)`.
///
/// `ρ*` must be energy-diagonal with diagonal blocks, as after
/// [`transform_state`] of an equilibrium state by its own transform.
pub fn commutator_expectation(rho_star: &StateFn, p: &ObservableFn, o: &ObservableFn) -> Result<C64> {
    if !rho_star.is_energy_diagonal() || !p.is_energy_diagonal() {
        return Err(Error::NotEnergyDiagonal);
    }
    let b = rho_star.blocks();
    let defect = std::iter::once(&b.bound)
        .chain(&b.continuum)
        .map(|m| {
            let mut off = m.clone();
            off.fill_diagonal(C64::new(0.0, 0.0));
            max_abs(&off)
        })
        .fold(0.0, f64::max);
    if defect > HERMITICITY_TOL {
        return Err(Error::NotDiagonal { defect });
    }
    if o.grid() != p.grid() || o.qnums() != p.qnums() {
        return Err(Error::GridMismatch);
    }
    let pb = p.blocks();
    let ob = o.blocks();
    let n = o.grid().len();
    let bracket = |left: &CMat, m: &CMat, right: &CMat| left * m - m * right;
    let mut cont_cont = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            cont_cont.push(bracket(&pb.continuum[k], ob.cc(k, l), &pb.continuum[l]));
        }
    }
    let comm = Blocks {
        bound: bracket(&pb.bound, &ob.bound, &pb.bound),
        continuum: (0..n).map(|k| bracket(&pb.continuum[k], &ob.continuum[k], &pb.continuum[k])).collect(),
        cont_bound: (0..n).map(|k| bracket(&pb.continuum[k], &ob.cont_bound[k], &pb.bound)).collect(),
        bound_cont: (0..n).map(|k| bracket(&pb.bound, &ob.bound_cont[k], &pb.continuum[k])).collect(),
        cont_cont,
    };
    dual_pairing(rho_star, &o.with_blocks(comm)?)
}
