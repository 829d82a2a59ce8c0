//! Time evolution of state functionals and the decay of off-diagonal
//! contributions to mean values.
//!
//! Stored components evolve as `ρ(x, x′) ↦ e^{−i(x−x′)t} ρ(x, x′)`, so the
//! conjugated coefficients that enter `(ρ|O)` pick up `e^{i(x−x′)t}`.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{
    dual_pairing, frobenius, pair_blocks, Blocks, CMat, ObservableFn, QuantumNumbers, SpectrumGrid, StateFn,
    HERMITICITY_TOL,
};

/// How the three oscillatory families of `(ρ(t)|O)` are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMode {
    /// Gauss–Legendre on the phase-multiplied samples. Refuses unresolved times.
    Plain,
    /// Filon weights: exact for the panel interpolant at any `t`.
    Filon,
    /// Plain when resolved, Filon otherwise.
    #[default]
    Auto,
}

pub fn evolve_state(rho: &StateFn, t: f64) -> StateFn {
    let blocks = rho.blocks().map_with_energies(rho.grid(), |x, y, b| b * C64::from_polar(1.0, -(x - y) * t));
    rho.with_blocks(blocks).expect("evolution preserves shapes")
}

pub fn equilibrium_state(rho: &StateFn) -> StateFn {
    rho.with_blocks(rho.blocks().energy_diagonal_part()).expect("projection preserves shapes")
}

/// Plain-mode check: the largest node gap times `|t|` must not exceed π/4.
pub fn check_resolution(grid: &SpectrumGrid, t: f64) -> Result<()> {
    let spacing = grid.max_spacing();
    let phase = spacing * t.abs();
    if phase <= FRAC_PI_4 {
        return Ok(());
    }
    let required_nodes = (grid.len() as f64 * phase / FRAC_PI_4).ceil() as usize;
    Err(Error::Resolution { t, spacing, phase, required_nodes })
}

/// `(ρ(t)|O)` with the oscillatory sums precomputed once, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct OscillatoryPairing {
    grid: Arc<SpectrumGrid>,
    stationary: C64,
    cont_bound: Vec<C64>,
    bound_cont: Vec<C64>,
    cont_cont: Vec<C64>,
}

impl OscillatoryPairing {
    pub fn new(rho: &StateFn, o: &ObservableFn) -> Result<Self> {
        if rho.grid() != o.grid() || rho.qnums() != o.qnums() {
            return Err(Error::GridMismatch);
        }
        let r = rho.blocks();
        let b = o.blocks();
        let w = rho.grid().weights();
        let stationary = frobenius(&r.bound, &b.bound)
            + r.continuum.iter().zip(&b.continuum).zip(w).map(|((x, y), w)| frobenius(x, y) * w).sum::<C64>();
        let pairwise = |a: &[CMat], b: &[CMat]| a.par_iter().zip(b).map(|(x, y)| frobenius(x, y)).collect();
        Ok(Self {
            grid: rho.grid().clone(),
            stationary,
            cont_bound: pairwise(&r.cont_bound, &b.cont_bound),
            bound_cont: pairwise(&r.bound_cont, &b.bound_cont),
            cont_cont: pairwise(&r.cont_cont, &b.cont_cont),
        })
    }

    /// The time-independent part: the pairing with the equilibrium state.
    pub fn stationary(&self) -> C64 {
        self.stationary
    }

    pub fn mode_for(&self, t: f64, mode: QuadratureMode) -> Result<QuadratureMode> {
        match mode {
            QuadratureMode::Plain => check_resolution(&self.grid, t).map(|_| QuadratureMode::Plain),
            QuadratureMode::Filon => Ok(QuadratureMode::Filon),
            QuadratureMode::Auto => Ok(if check_resolution(&self.grid, t).is_ok() {
                QuadratureMode::Plain
            } else {
                QuadratureMode::Filon
            }),
        }
    }

    /// The three oscillatory terms at time `t`.
    pub fn oscillatory(&self, t: f64, mode: QuadratureMode) -> Result<C64> {
        // f[k] ≈ w_k e^{iω_k t}
        let f: Vec<C64> = match self.mode_for(t, mode)? {
            QuadratureMode::Filon => self.grid.rule().filon_weights(t),
            _ => self
                .grid
                .nodes()
                .iter()
                .zip(self.grid.weights())
                .map(|(&x, &w)| C64::from_polar(w, x * t))
                .collect(),
        };
        let n = f.len();
        let w0 = self.grid.omega0();
        let mut c0 = C64::new(0.0, 0.0);
        let mut oc = C64::new(0.0, 0.0);
        for k in 0..n {
            c0 += f[k] * self.cont_bound[k];
            oc += f[k].conj() * self.bound_cont[k];
        }
        let cc: C64 = (0..n)
            .into_par_iter()
            .map(|k| {
                let row = &self.cont_cont[k * n..(k + 1) * n];
                f[k] * row.iter().zip(&f).map(|(h, fl)| fl.conj() * h).sum::<C64>()
            })
            .sum();
        Ok(C64::from_polar(1.0, -w0 * t) * c0 + C64::from_polar(1.0, w0 * t) * oc + cc)
    }

    pub fn at(&self, t: f64, mode: QuadratureMode) -> Result<C64> {
        Ok(self.stationary + self.oscillatory(t, mode)?)
    }
}

fn require_self_adjoint(o: &ObservableFn) -> Result<()> {
    let defect = o.self_adjoint_defect();
    if defect > HERMITICITY_TOL {
        return Err(Error::NotHermitian { defect, tolerance: HERMITICITY_TOL });
    }
    Ok(())
}

/// `(ρ(t)|O)` for self-adjoint `O`.
///
/// In plain mode this is literally `dual_pairing(evolve_state(ρ, t), O)`.
pub fn expectation(rho: &StateFn, o: &ObservableFn, t: f64, mode: QuadratureMode) -> Result<f64> {
    require_self_adjoint(o)?;
    let pairing = OscillatoryPairing::new(rho, o)?;
    match pairing.mode_for(t, mode)? {
        QuadratureMode::Filon => Ok(pairing.at(t, QuadratureMode::Filon)?.re),
        _ => Ok(dual_pairing(&evolve_state(rho, t), o)?.re),
    }
}

/// `⟨O⟩_ρ(t) − ⟨O⟩_ρ*`
pub fn signed_deficit(rho: &StateFn, o: &ObservableFn, t: f64, mode: QuadratureMode) -> Result<f64> {
    require_self_adjoint(o)?;
    Ok(OscillatoryPairing::new(rho, o)?.oscillatory(t, mode)?.re)
}

pub fn decoherence_deficit(rho: &StateFn, o: &ObservableFn, t: f64, mode: QuadratureMode) -> Result<f64> {
    signed_deficit(rho, o, t, mode).map(f64::abs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScan {
    pub state_id: String,
    pub observable_id: String,
    pub times: Vec<f64>,
    pub expectations: Vec<f64>,
    pub equilibrium: f64,
    pub signed: Vec<f64>,
    pub deficits: Vec<f64>,
}

impl DecayScan {
    pub fn final_ratio(&self) -> Option<f64> {
        let first = *self.deficits.first()?;
        Some(*self.deficits.last()? / first)
    }
}

/// Deficits at each time, computed in parallel, in input order.
pub fn decay_scan(
    rho: &StateFn,
    o: &ObservableFn,
    times: &[f64],
    mode: QuadratureMode,
    ids: (&str, &str),
) -> Result<DecayScan> {
    if times.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    require_self_adjoint(o)?;
    let pairing = OscillatoryPairing::new(rho, o)?;
    let signed: Vec<f64> =
        times.par_iter().map(|&t| pairing.oscillatory(t, mode).map(|z| z.re)).collect::<Result<_>>()?;
    let equilibrium = pairing.stationary().re;
    Ok(DecayScan {
        state_id: ids.0.to_string(),
        observable_id: ids.1.to_string(),
        times: times.to_vec(),
        expectations: signed.iter().map(|s| equilibrium + s).collect(),
        equilibrium,
        deficits: signed.iter().map(|s| s.abs()).collect(),
        signed,
    })
}

/// `n` logarithmically spaced times on `[t_min, t_max]`.
pub fn log_times(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(invalid("times", format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]")));
    }
    if n < 2 {
        return Err(invalid("n_times", "need at least 2 points"));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => t_min,
            i if i == n - 1 => t_max,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

/// Sampled suprema of the deficit over `[2^j T, 2^{j+1} T]` for `j < levels`.
pub fn dyadic_suprema(
    rho: &StateFn,
    o: &ObservableFn,
    t0: f64,
    levels: usize,
    samples: usize,
    mode: QuadratureMode,
) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || samples == 0 {
        return Err(invalid("dyadic", "need T > 0 and at least one sample per dyad"));
    }
    require_self_adjoint(o)?;
    let pairing = OscillatoryPairing::new(rho, o)?;
    (0..levels)
        .map(|j| {
            let lo = t0 * (1u64 << j) as f64;
            (0..=samples)
                .into_par_iter()
                .map(|i| pairing.oscillatory(lo * (1.0 + i as f64 / samples as f64), mode).map(|z| z.norm()))
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
        })
        .collect()
}

/// `dρ/dt` at `t = 0`, a functional that is not itself a state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    grid: Arc<SpectrumGrid>,
    qnums: Arc<QuantumNumbers>,
    blocks: Blocks,
}

impl StateDerivative {
    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn is_zero(&self) -> bool {
        self.blocks == Blocks::zeros(self.grid.len(), self.qnums.len())
    }

    pub fn pairing(&self, o: &ObservableFn) -> Result<C64> {
        if &self.grid != o.grid() || &self.qnums != o.qnums() {
            return Err(Error::GridMismatch);
        }
        Ok(pair_blocks(&self.blocks, o.blocks(), self.grid.weights()))
    }
}

/// Stored components scaled by `−i(x − x′)`.
pub fn liouvillian_apply(rho: &StateFn) -> StateDerivative {
    let blocks = rho.blocks().map_with_energies(rho.grid(), |x, y, b| b * C64::new(0.0, -(x - y)));
    StateDerivative { grid: rho.grid().clone(), qnums: rho.qnums().clone(), blocks }
}

/// `i[H, O]`, blockwise `i(x − x′)·O(x, x′)`, so that
/// `(liouvillian_apply(ρ)|O) = (ρ|i[H, O])`.
pub fn hamiltonian_commutator(o: &ObservableFn) -> ObservableFn {
    let blocks = o.blocks().map_with_energies(o.grid(), |x, y, b| b * C64::new(0.0, x - y));
    o.with_blocks(blocks).expect("commutator preserves shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SIGMA: f64 = 0.2;

    fn demo() -> (StateFn, ObservableFn) {
        crate::fixtures::gaussian_demo(SIGMA, 24, 12).unwrap()
    }

    // |∫ g(ω) e^{iωt} dω|² by a 10⁶-point trapezoid on [0, 3]
    fn oracle(t: f64) -> f64 {
        let norm = (2.0 / (std::f64::consts::PI * SIGMA * SIGMA)).powf(0.25);
        let n = 1_000_000;
        let h = 3.0 / n as f64;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..=n {
            let w = i as f64 * h;
            let c = if i == 0 || i == n { 0.5 } else { 1.0 };
            let z = (w - 1.0) / SIGMA;
            acc += C64::from_polar(c * norm * (-z * z).exp(), w * t);
        }
        (acc * h).norm_sqr()
    }

    #[test]
    fn evolution_at_zero_is_identity_and_phases_add() {
        let (rho, _) = demo();
        assert_eq!(evolve_state(&rho, 0.0), rho);
        let a = evolve_state(&evolve_state(&rho, 0.7), 1.9);
        let b = evolve_state(&rho, 2.6);
        let mut diff = a.blocks().clone();
        diff.axpy(C64::new(-1.0, 0.0), b.blocks());
        assert!(diff.off_diagonal_magnitude() < 1e-14);
        assert!(evolve_state(&rho, 13.0).validate().passed());
    }

    #[test]
    fn equilibrium_is_fixed_and_stationary() {
        let (rho, _) = demo();
        let eq = equilibrium_state(&rho);
        assert_eq!(equilibrium_state(&eq), eq);
        assert_eq!(evolve_state(&eq, 42.0), eq);
        assert!(liouvillian_apply(&eq).is_zero());
        assert!(eq.validate().passed());
    }

    #[test]
    fn identity_expectation_constant() {
        let (rho, _) = demo();
        let id = ObservableFn::identity(rho.grid().clone(), rho.qnums().clone());
        for t in [0.0, 1.0, 30.0] {
            assert_abs_diff_eq!(expectation(&rho, &id, t, QuadratureMode::Auto).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn demo_matches_oracle() {
        let (rho, o) = demo();
        for t in [0.0, 3.0, 12.5, 50.0] {
            let got = decoherence_deficit(&rho, &o, t, QuadratureMode::Filon).unwrap();
            assert_abs_diff_eq!(got, oracle(t), epsilon = 1e-8);
        }
        let d0 = decoherence_deficit(&rho, &o, 0.0, QuadratureMode::Auto).unwrap();
        assert_abs_diff_eq!(d0, SIGMA * (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
        let late = decoherence_deficit(&rho, &o, 5.0 / SIGMA, QuadratureMode::Filon).unwrap();
        assert!(late < 1e-5 * d0);
    }

    #[test]
    fn plain_mode_refuses_unresolved_times() {
        let (rho, o) = demo();
        let err = expectation(&rho, &o, 500.0, QuadratureMode::Plain).unwrap_err();
        assert!(matches!(err, Error::Resolution { required_nodes, .. } if required_nodes > rho.grid().len()));
        assert!(expectation(&rho, &o, 500.0, QuadratureMode::Auto).is_ok());
    }

    #[test]
    fn central_difference_matches_liouvillian() {
        let (rho, o) = demo();
        let h = 1e-5;
        let fd = (expectation(&rho, &o, h, QuadratureMode::Plain).unwrap()
            - expectation(&rho, &o, -h, QuadratureMode::Plain).unwrap())
            / (2.0 * h);
        let exact = liouvillian_apply(&rho).pairing(&o).unwrap().re;
        assert_abs_diff_eq!(fd, exact, epsilon = 1e-8);
        let via_commutator = dual_pairing(&rho, &hamiltonian_commutator(&o)).unwrap();
        assert_abs_diff_eq!(liouvillian_apply(&rho).pairing(&o).unwrap().re, via_commutator.re, epsilon = 1e-14);
    }

    #[test]
    fn scan_of_diagonal_state_is_zero() {
        let (rho, o) = demo();
        let eq = equilibrium_state(&rho);
        let times = log_times(0.1, 100.0, 12).unwrap();
        let scan = decay_scan(&eq, &o, &times, QuadratureMode::Auto, ("eq", "ones")).unwrap();
        assert!(scan.deficits.iter().all(|&d| d == 0.0));
        let id = ObservableFn::identity(rho.grid().clone(), rho.qnums().clone());
        let scan = decay_scan(&rho, &id, &times, QuadratureMode::Auto, ("demo", "id")).unwrap();
        assert!(scan.deficits.iter().all(|&d| d == 0.0));
        assert!(scan.expectations.iter().all(|&e| (e - 1.0).abs() < 1e-10));
    }

    #[test]
    fn demo_dyadic_suprema_decrease() {
        let (rho, o) = demo();
        let s = dyadic_suprema(&rho, &o, 1.0 / SIGMA, 3, 32, QuadratureMode::Filon).unwrap();
        assert!(s.windows(2).all(|p| p[1] < p[0]), "{s:?}");
    }

    #[test]
    fn log_times_endpoints() {
        let t = log_times(0.01, 100.0, 5).unwrap();
        assert_eq!(t[0], 0.01);
        assert_eq!(t[4], 100.0);
        assert_abs_diff_eq!(t[2], 1.0, epsilon = 1e-14);
        assert!(log_times(0.0, 1.0, 3).is_err());
    }
}
