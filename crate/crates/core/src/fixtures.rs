//! Seeded random states and observables for property suites, and the
//! Gaussian decoherence demo.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::profile::Profile;
use crate::spectral::{Amplitudes, Blocks, CMat, CVec, ObservableFn, QuantumNumbers, SpectrumGrid, StateFn};

/// Same seed, same sequence of fixtures.
#[derive(Debug, Clone)]
pub struct Fixtures {
    rng: ChaCha8Rng,
}

impl Fixtures {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn complex(&mut self) -> C64 {
        C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
    }

    /// One to three Gaussians centred in the lower half of `[0, ω_max]`,
    /// narrow enough to leave no tail beyond `ω_max`.
    pub fn profile(&mut self, omega_max: f64) -> Profile {
        let n = self.rng.gen_range(1..=3);
        let terms = (0..n)
            .map(|_| Profile::Gaussian {
                center: omega_max * self.rng.gen_range(0.15..0.5),
                width: omega_max * self.rng.gen_range(0.04..0.1),
                amplitude: self.rng.gen_range(0.2..1.0),
                phase: self.rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        Profile::Sum { terms }
    }

    pub fn amplitudes(&mut self, grid: &SpectrumGrid, qnums: &QuantumNumbers) -> Result<Amplitudes> {
        let d = qnums.len();
        let bound: Vec<C64> = (0..d).map(|_| self.complex() * 0.5).collect();
        let profiles: Vec<Profile> = (0..d).map(|_| self.profile(grid.omega_max())).collect();
        Amplitudes::from_profiles(grid, &bound, &profiles)
    }

    pub fn pure_state(&mut self, grid: &Arc<SpectrumGrid>, qnums: &Arc<QuantumNumbers>) -> Result<StateFn> {
        let amps = self.amplitudes(grid, qnums)?;
        StateFn::pure(grid.clone(), qnums.clone(), &amps)
    }

    /// A mixture of `rank` random pure states.
    pub fn state(&mut self, grid: &Arc<SpectrumGrid>, qnums: &Arc<QuantumNumbers>, rank: usize) -> Result<StateFn> {
        let parts = (0..rank.max(1))
            .map(|_| Ok((self.rng.gen_range(0.1..1.0), self.pure_state(grid, qnums)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(f64, &StateFn)> = parts.iter().map(|(p, s)| (*p, s)).collect();
        StateFn::mixture(&refs)
    }

    /// A pure state `b|ω₀⟩ + ∫ g(ω) c |ω⟩` with one random label vector `c`, so
    /// every continuum block of its equilibrium has the same eigenbasis and
    /// pointer tracking cannot meet a crossing.
    pub fn aligned_state(&mut self, grid: &Arc<SpectrumGrid>, qnums: &Arc<QuantumNumbers>) -> Result<StateFn> {
        let d = qnums.len();
        let bound: Vec<C64> = (0..d).map(|_| self.complex() * 0.5).collect();
        let c: Vec<C64> = (0..d).map(|_| self.complex()).collect();
        let g = self.profile(grid.omega_max());
        let shape = Amplitudes::from_profiles(grid, &[C64::new(0.0, 0.0)], &[g])?;
        let amps = Amplitudes {
            bound: CVec::from_vec(bound),
            continuum: shape.continuum.iter().map(|v| CVec::from_iterator(d, c.iter().map(|z| z * v[0]))).collect(),
        };
        StateFn::pure(grid.clone(), qnums.clone(), &amps)
    }

    pub fn hermitian(&mut self, d: usize) -> CMat {
        let a = CMat::from_fn(d, d, |_, _| self.complex());
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    /// `B₀ + ∫ (B₁ g₁(ω) + B₂ g₂(ω)) |ω⟩⟨ω|` with Hermitian label matrices and
    /// smooth real envelopes.
    pub fn energy_diagonal_observable(
        &mut self,
        grid: &Arc<SpectrumGrid>,
        qnums: &Arc<QuantumNumbers>,
    ) -> Result<ObservableFn> {
        let d = qnums.len();
        let (b0, b1, b2) = (self.hermitian(d), self.hermitian(d), self.hermitian(d));
        let (g1, g2) = (self.profile(grid.omega_max()), self.profile(grid.omega_max()));
        let continuum = grid
            .nodes()
            .iter()
            .map(|&w| &b1 * C64::new(g1.eval(w).norm(), 0.0) + &b2 * C64::new(g2.eval(w).re, 0.0))
            .collect();
        ObservableFn::energy_diagonal(grid.clone(), qnums.clone(), b0, continuum)
    }

    /// An energy-diagonal part plus `Σ_j s_j |a_j⟩⟨a_j|` for two smooth random
    /// vectors, so every block family is populated.
    pub fn observable(&mut self, grid: &Arc<SpectrumGrid>, qnums: &Arc<QuantumNumbers>) -> Result<ObservableFn> {
        let mut blocks = self.energy_diagonal_observable(grid, qnums)?.into_blocks();
        for _ in 0..2 {
            let s = self.rng.gen_range(-1.0..1.0);
            let a = self.amplitudes(grid, qnums)?;
            blocks.axpy(C64::new(s, 0.0), &outer(&a, &a));
        }
        ObservableFn::new(grid.clone(), qnums.clone(), blocks)
    }
}

/// `|a⟩⟨b|` on every block family except the energy-diagonal one.
pub fn outer(a: &Amplitudes, b: &Amplitudes) -> Blocks {
    let n = a.continuum.len();
    let d = a.bound.len();
    let mut out = Blocks::zeros(n, d);
    out.bound = &a.bound * b.bound.adjoint();
    for k in 0..n {
        out.cont_bound[k] = &a.continuum[k] * b.bound.adjoint();
        out.bound_cont[k] = &a.bound * b.continuum[k].adjoint();
        for l in 0..n {
            *out.cc_mut(k, l) = &a.continuum[k] * b.continuum[l].adjoint();
        }
    }
    out
}

/// The Gaussian off-diagonal demo: a continuum packet `g(ω) ∝ exp(−((ω − 1)/σ)²)`
/// on `[0, 3]` and the observable whose kernel is 1 at every pair of energies,
/// so that `(ρ(t)|O) = |∫ g(ω) e^{−iωt} dω|²`.
pub fn gaussian_demo(sigma: f64, n_panels: usize, order: usize) -> Result<(StateFn, ObservableFn)> {
    let grid = Arc::new(SpectrumGrid::new(-0.5, 3.0, n_panels, order)?);
    let q = Arc::new(QuantumNumbers::single());
    let amps = Amplitudes::from_profiles(&grid, &[C64::new(0.0, 0.0)], &[Profile::gaussian(1.0, sigma)])?;
    let rho = StateFn::pure(grid.clone(), q.clone(), &amps)?;
    let ones = Amplitudes { bound: CVec::zeros(1), continuum: vec![CVec::from_element(1, C64::new(1.0, 0.0)); grid.len()] };
    let o = ObservableFn::new(grid, q, outer(&ones, &ones))?;
    Ok((rho, o))
}
