//! The classical equilibrium density as weighted particles.
//!
//! In the pointer basis the equilibrium state is a sum over energies `x` and
//! labels `r` of nonnegative weights times the level-set density
//! `δ(H^W − x) Π_i δ(P_i^W − r_i)`. Each term is kept as one particle sitting at
//! `(x, r)`, so moments of `H^W` and `P_i^W` are exact powers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pointer::PointerTransform;
use crate::spectral::{Sector, StateFn, NEGATIVITY_TOL, NORMALIZATION_TOL};

/// Largest off-diagonal entry accepted in a pointer-basis block, relative to its diagonal.
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    weight: f64,
    energy: f64,
    sector: Sector,
    label: usize,
    values: Vec<f64>,
}

impl Particle {
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Index of the pointer label.
    pub fn label(&self) -> usize {
        self.label
    }

    /// `r_i` on each label axis.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫ ρ_{xr} Cⁿ` for the level-set density of this particle.
    pub fn moment(&self, which: Constant, n: u32) -> Result<f64> {
        let v = match which {
            Constant::Energy => self.energy,
            Constant::Label(i) => *self.values.get(i).ok_or_else(|| axis_error(i, self.values.len()))?,
        };
        Ok(v.powi(n as i32))
    }
}

fn axis_error(i: usize, n: usize) -> Error {
    Error::InvalidParameter { name: "axis", reason: format!("label axis {i} out of range for {n} axes") }
}

/// A constant of the motion: `H^W` or the symbol of the `i`-th pointer observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Energy,
    Label(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    particles: Vec<Particle>,
    n_axes: usize,
}

impl ClassicalEnsemble {
    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn n_axes(&self) -> usize {
        self.n_axes
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).fold(f64::INFINITY, f64::min)
    }

    /// Density of `H^W` values smeared by a Gaussian of width `eps`, for plotting.
    pub fn mollified_energy_density(&self, energies: &[f64], eps: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: format!("{eps} must be positive") });
        }
        let norm = 1.0 / (eps * (2.0 * PI).sqrt());
        Ok(energies
            .iter()
            .map(|&x| {
                self.particles.iter().map(|p| p.weight * norm * (-0.5 * ((x - p.energy) / eps).powi(2)).exp()).sum()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub per_particle: Vec<f64>,
    pub aggregate: f64,
}

/// One particle per sector and pointer label with nonzero weight: `ρ_r(ω₀)` on
/// the bound level, `w_k ρ_r(ω_k)` on continuum node `k`.
///
/// `rho_star` must already be expressed in the pointer basis of `u`, with
/// diagonal energy-diagonal blocks.
pub fn classical_equilibrium_density(rho_star: &StateFn, u: &PointerTransform) -> Result<ClassicalEnsemble> {
    if **u.grid() != **rho_star.grid() || **u.qnums() != **rho_star.qnums() {
        return Err(Error::GridMismatch);
    }
    if !rho_star.is_energy_diagonal() {
        return Err(Error::NotEnergyDiagonal);
    }
    let grid = rho_star.grid();
    let qnums = rho_star.qnums();
    let b = rho_star.blocks();
    let d = qnums.len();
    let sectors = std::iter::once((Sector::Bound, &b.bound, 1.0))
        .chain(b.continuum.iter().zip(grid.weights()).enumerate().map(|(k, (m, &w))| (Sector::Node(k), m, w)));

    let mut particles = Vec::new();
    for (sector, block, w) in sectors {
        let defect = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|ij| block[ij].norm())
            .fold(0.0, f64::max);
        let scale = (0..d).map(|i| block[(i, i)].norm()).fold(1.0, f64::max);
        if defect > DIAGONAL_TOL * scale {
            return Err(Error::NotDiagonal { defect });
        }
        for r in 0..d {
            let rho = block[(r, r)].re;
            if rho < NEGATIVITY_TOL {
                return Err(Error::NegativeWeight { value: rho });
            }
            let weight = w * rho.max(0.0);
            if weight > 0.0 {
                particles.push(Particle {
                    weight,
                    energy: grid.energy(sector),
                    sector,
                    label: r,
                    values: qnums.label(r).iter().map(|&v| v as f64).collect(),
                });
            }
        }
    }
    let ens = ClassicalEnsemble { particles, n_axes: qnums.n_axes() };
    let total = ens.total_weight();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { value: total });
    }
    Ok(ens)
}

pub fn classical_moments(ens: &ClassicalEnsemble, which: Constant, n: u32) -> Result<Moments> {
    let per_particle = ens.particles.iter().map(|p| p.moment(which, n)).collect::<Result<Vec<_>>>()?;
    let aggregate = ens.particles.iter().zip(&per_particle).map(|(p, m)| p.weight * m).sum();
    Ok(Moments { per_particle, aggregate })
}
