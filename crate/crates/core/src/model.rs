//! Eigenfunction providers for concrete one-dimensional Hamiltonians.
//!
//! The attractive delta well `H = p²/2 − g·δ(q)` with `p = −iħ∂_q` has one
//! bound state and a doubly degenerate continuum, labelled by parity.
//!
//! * bound: `ψ₀(q) = √κ e^{−κ|q|}`, `κ = g/ħ²`, `ω₀ = −g²/(2ħ²)`
//! * even: `A cos(k|q| + δ)`, `tan δ = κ/k`
//! * odd: `A sin(kq)`
//!
//! with `ω = p²/2`, `k = p/ħ`. Continuum states are normalized in energy,
//! `⟨ψ_ω|ψ_ω′⟩ = δ(ω − ω′)`, which fixes `A = 1/√(πħp)`; momentum-normalized
//! states differ by the factor `√p` (`dω = p dp`).

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_legendre, CompositeRule};
use crate::spectral::{Amplitudes, CVec, QuantumNumbers, SpectrumGrid, TAIL_MASS_TOL};
use crate::wigner::PhaseSpaceGrid;

/// Real eigenfunctions of a model with one bound level and a labelled continuum.
pub trait SpectralModel: Sync {
    fn hbar(&self) -> f64;
    fn omega0(&self) -> f64;
    fn qnums(&self) -> QuantumNumbers;
    /// `None` when label `m` has no bound state.
    fn bound(&self, m: usize, q: f64) -> Option<f64>;
    fn continuum(&self, m: usize, omega: f64, q: f64) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedPacket {
    pub spectrum: SpectrumGrid,
    pub amplitudes: Amplitudes,
    pub grid: PhaseSpaceGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaWell {
    g: f64,
    hbar: f64,
}

pub const EVEN: usize = 0;
pub const ODD: usize = 1;

impl DeltaWell {
    pub fn new(g: f64) -> Result<Self> {
        Self::with_hbar(g, 1.0)
    }

    pub fn with_hbar(g: f64, hbar: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("g", format!("{g} must be positive")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid("hbar", format!("{hbar} must be positive")));
        }
        Ok(Self { g, hbar })
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.g / (self.hbar * self.hbar)
    }

    pub fn wavenumber(&self, omega: f64) -> f64 {
        (2.0 * omega).sqrt() / self.hbar
    }

    pub fn phase_shift(&self, omega: f64) -> f64 {
        (self.kappa() / self.wavenumber(omega)).atan()
    }

    /// `1/√(πħp)`
    pub fn normalization(&self, omega: f64) -> f64 {
        1.0 / (PI * self.hbar * (2.0 * omega).sqrt()).sqrt()
    }

    pub fn bound_state(&self, q: f64) -> f64 {
        let k = self.kappa();
        k.sqrt() * (-k * q.abs()).exp()
    }

    pub fn even(&self, omega: f64, q: f64) -> f64 {
        self.normalization(omega) * (self.wavenumber(omega) * q.abs() + self.phase_shift(omega)).cos()
    }

    pub fn odd(&self, omega: f64, q: f64) -> f64 {
        self.normalization(omega) * (self.wavenumber(omega) * q).sin()
    }

    /// Bound and continuum amplitudes `⟨ψ|χ⟩` of the packet
    /// `χ(q) = (2πσ²)^{−1/4} exp(−(q − q₀)²/(4σ²) + ip₀(q − q₀)/ħ)`,
    /// integrated over `q₀ ± 12σ` with a panel break at the origin.
    pub fn gaussian_packet(&self, grid: &SpectrumGrid, q0: f64, sigma: f64, p0: f64) -> Result<Amplitudes> {
        if !(sigma > 0.0 && sigma.is_finite() && q0.is_finite() && p0.is_finite()) {
            return Err(invalid("packet", "need finite q0, p0 and a positive width"));
        }
        let hbar = self.hbar;
        let sigma_p = hbar / (2.0 * sigma);
        let p_max = (2.0 * grid.omega_max()).sqrt();
        let mass = 0.5 * erfc((p_max - p0.abs()) / (std::f64::consts::SQRT_2 * sigma_p));
        if mass > TAIL_MASS_TOL {
            return Err(Error::TailMass { profile: format!("packet p0 = {p0}, sigma = {sigma}"), mass });
        }
        let k0 = p0 / hbar;
        let (lo, hi) = (q0 - 12.0 * sigma, q0 + 12.0 * sigma);
        let pieces = if lo < 0.0 && hi > 0.0 { vec![(lo, 0.0), (0.0, hi)] } else { vec![(lo, hi)] };
        let k_top = p_max / hbar + self.kappa();
        let mut q = Vec::new();
        let mut w = Vec::new();
        for (a, b) in pieces {
            let panels = ((b - a) * k_top / 8.0).ceil().max(4.0) as usize;
            let rule = CompositeRule::new(a, b, panels, 16)?;
            q.extend_from_slice(rule.nodes());
            w.extend_from_slice(rule.weights());
        }
        let chi: Vec<C64> = q
            .iter()
            .zip(&w)
            .map(|(&x, &wt)| {
                let env = (2.0 * PI * sigma * sigma).powf(-0.25) * (-(x - q0).powi(2) / (4.0 * sigma * sigma)).exp();
                C64::from_polar(wt * env, k0 * (x - q0))
            })
            .collect();
        let project = |f: &dyn Fn(f64) -> f64| -> C64 { q.iter().zip(&chi).map(|(&x, c)| c * f(x)).sum() };
        let continuum = grid
            .nodes()
            .iter()
            .map(|&omega| {
                let even = project(&|x| self.even(omega, x));
                let odd = project(&|x| self.odd(omega, x));
                CVec::from_vec(vec![even, odd])
            })
            .collect();
        let bound = project(&|x| self.bound_state(x));
        Ok(Amplitudes { bound: CVec::from_vec(vec![bound, C64::new(0.0, 0.0)]), continuum })
    }

    /// The packet above cut off smoothly in momentum by `½ erfc((p − |p₀| − 10σ_p)/σ_p)`,
    /// `σ_p = ħ/2σ`, with an energy grid and a phase-space grid on `[−L, L]`
    /// that resolve its position kernel.
    ///
    /// A sharp spectral cutoff would leave the kink every eigenfunction has at
    /// the origin ringing across the whole grid. The energy panels are uniform
    /// in `p` and advance the phase `p(|q| + |q′|)/ħ` by at most 4 across `2L`.
    pub fn band_limited_packet(&self, q0: f64, sigma: f64, p0: f64, half_width: f64) -> Result<BandLimitedPacket> {
        if !(sigma > 0.0 && half_width > 0.0) {
            return Err(invalid("packet", "width and half-width must be positive"));
        }
        let hbar = self.hbar;
        let sigma_p = hbar / (2.0 * sigma);
        let p_max = p0.abs() + 15.0 * sigma_p;
        let omega_max = 0.5 * p_max * p_max;
        let panels = (p_max * 2.0 * half_width / (4.0 * hbar)).ceil() as usize;
        let spectrum = self.momentum_grid(omega_max, panels, 16)?;
        let edge = p0.abs() + 10.0 * sigma_p;
        let amplitudes = self
            .gaussian_packet(&spectrum, q0, sigma, p0)?
            .filtered(&spectrum, |w| 0.5 * erfc(((2.0 * w).sqrt() - edge) / sigma_p));
        let grid = PhaseSpaceGrid::with_spacing(half_width, 0.99 * PI / 4.0 * hbar / p_max, hbar)?;
        Ok(BandLimitedPacket { spectrum, amplitudes, grid })
    }

    /// A spectral grid whose bound energy is this model's.
    pub fn spectrum_grid(&self, omega_max: f64, n_panels: usize, panel_order: usize) -> Result<SpectrumGrid> {
        SpectrumGrid::new(self.omega0(), omega_max, n_panels, panel_order)
    }

    /// Panels of equal width in `p = √(2ω)`, on which the eigenfunction
    /// phase `pq/ħ` advances by the same amount.
    pub fn momentum_grid(&self, omega_max: f64, n_panels: usize, panel_order: usize) -> Result<SpectrumGrid> {
        if n_panels == 0 {
            return Err(invalid("n_panels", "must be at least 1"));
        }
        let breaks: Vec<f64> =
            (0..=n_panels).map(|i| omega_max * (i as f64 / n_panels as f64).powi(2)).collect();
        SpectrumGrid::with_breakpoints(self.omega0(), &breaks, panel_order)
    }
}

impl SpectralModel for DeltaWell {
    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn omega0(&self) -> f64 {
        -self.g * self.g / (2.0 * self.hbar * self.hbar)
    }

    fn qnums(&self) -> QuantumNumbers {
        QuantumNumbers::parity()
    }

    fn bound(&self, m: usize, q: f64) -> Option<f64> {
        (m == EVEN).then(|| self.bound_state(q))
    }

    fn continuum(&self, m: usize, omega: f64, q: f64) -> f64 {
        if m == EVEN {
            self.even(omega, q)
        } else {
            self.odd(omega, q)
        }
    }
}

/// Composite Simpson on uniform samples; the last three intervals use the
/// 3/8 rule when the interval count is odd.
pub(crate) fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    match n {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        _ => {
            let even_part = if n % 2 == 0 { n } else { n - 3 };
            let mut s = 0.0;
            for i in (0..even_part).step_by(2) {
                s += f[i] + 4.0 * f[i + 1] + f[i + 2];
            }
            s *= h / 3.0;
            if n % 2 == 1 {
                let j = even_part;
                s += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
            }
            s
        }
    }
}

/// `∫ f g dq` over a symmetric grid with a node at `q = 0`, integrating each
/// half-line separately so that kinks at the origin cost no accuracy.
pub(crate) fn half_line_inner(q: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let h = q[1] - q[0];
    let mid = q.len() / 2;
    let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let left: Vec<f64> = prod[..=mid].to_vec();
    simpson(&left, h) + simpson(&prod[mid..], h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionReport {
    /// `max |Hψ₀ − ω₀ψ₀|` with a three-point Laplacian, `|q| ≥ 2Δq`.
    pub bound_residual: f64,
    pub bound_norm: f64,
    /// Per probe energy: (ω, even residual, odd residual), each relative to `A`.
    pub continuum_residuals: Vec<(f64, f64, f64)>,
    /// Per probe energy: `|⟨ψ₀|ψ_{ω,even}⟩|`.
    pub bound_even_overlaps: Vec<(f64, f64)>,
    /// Per probe energy: `|⟨ψ_{ω,even}|ψ_{ω,odd}⟩|`.
    pub even_odd_overlaps: Vec<(f64, f64)>,
}

/// Checks the delta-well eigenfunctions on `n_q` symmetric points of `[−L, L]`.
pub fn eigenfunction_check(model: &DeltaWell, half_width: f64, n_q: usize, probes: &[f64]) -> Result<EigenfunctionReport> {
    if n_q < 16 || n_q % 2 == 0 {
        return Err(invalid("n_q", "need an odd count ≥ 16 so that q = 0 is a node"));
    }
    let h = 2.0 * half_width / (n_q - 1) as f64;
    let mid = (n_q / 2) as i64;
    let q: Vec<f64> = (0..n_q as i64).map(|i| (i - mid) as f64 * h).collect();
    let hb2 = model.hbar() * model.hbar() / 2.0;
    let residual = |psi: &[f64], e: f64| -> f64 {
        (1..n_q - 1)
            .filter(|&i| q[i].abs() >= 2.0 * h - 1e-12)
            .map(|i| (-hb2 * (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / (h * h) - e * psi[i]).abs())
            .fold(0.0, f64::max)
    };
    let psi0: Vec<f64> = q.iter().map(|&x| model.bound_state(x)).collect();
    let mut report = EigenfunctionReport {
        bound_residual: residual(&psi0, model.omega0()),
        bound_norm: half_line_inner(&q, &psi0, &psi0),
        continuum_residuals: Vec::new(),
        bound_even_overlaps: Vec::new(),
        even_odd_overlaps: Vec::new(),
    };
    for &w in probes {
        if !(w > 0.0) {
            return Err(invalid("probe", format!("energy {w} must be positive")));
        }
        let even: Vec<f64> = q.iter().map(|&x| model.even(w, x)).collect();
        let odd: Vec<f64> = q.iter().map(|&x| model.odd(w, x)).collect();
        let a = model.normalization(w);
        report.continuum_residuals.push((w, residual(&even, w) / a, residual(&odd, w) / a));
        report.bound_even_overlaps.push((w, half_line_inner(&q, &psi0, &even).abs()));
        let cross: f64 = even.iter().zip(&odd).map(|(e, o)| e * o).sum::<f64>() * h;
        report.even_odd_overlaps.push((w, cross.abs()));
    }
    Ok(report)
}

/// Relative L² error of reconstructing a normalized Gaussian of the given
/// centre and width from the bound state plus the continuum truncated at
/// `ω_max`. The energy integral is done in momentum, `dω = p dp`, where the
/// integrand is smooth.
///
/// A Gaussian that overlaps the origin violates the derivative jump every
/// eigenfunction obeys there, so its expansion converges only like a power
/// of `ω_max`; away from the origin convergence is spectral.
pub fn completeness_defect(model: &DeltaWell, omega_max: f64, center: f64, width: f64) -> Result<f64> {
    if !(omega_max > 0.0 && width > 0.0) {
        return Err(invalid("completeness", "need ω_max > 0 and width > 0"));
    }
    let half_width = center.abs() + 12.0 * width;
    let n_q = {
        let n = (2.0 * half_width / (width / 40.0)).ceil() as usize;
        n + 1 - n % 2 + 2
    };
    let h = 2.0 * half_width / (n_q - 1) as f64;
    let mid = (n_q / 2) as i64;
    let q: Vec<f64> = (0..n_q as i64).map(|i| (i - mid) as f64 * h).collect();
    let chi: Vec<f64> = q
        .iter()
        .map(|&x| (2.0 * PI * width * width).powf(-0.25) * (-(x - center).powi(2) / (4.0 * width * width)).exp())
        .collect();

    let psi0: Vec<f64> = q.iter().map(|&x| model.bound_state(x)).collect();
    let c0 = half_line_inner(&q, &psi0, &chi);
    let mut rec: Vec<f64> = psi0.iter().map(|p| c0 * p).collect();

    let p_max = (2.0 * omega_max).sqrt();
    let panels = ((p_max * half_width / model.hbar()) / 4.0).ceil().max(4.0) as usize;
    let (u, wu) = gauss_legendre(16);
    let dp = p_max / panels as f64;
    for j in 0..panels {
        for (ui, wi) in u.iter().zip(&wu) {
            let p = dp * (j as f64 + 0.5 * (1.0 + ui));
            let weight = 0.5 * dp * wi * p;
            let omega = 0.5 * p * p;
            for m in [EVEN, ODD] {
                let psi: Vec<f64> = q.iter().map(|&x| model.continuum(m, omega, x)).collect();
                let c = half_line_inner(&q, &psi, &chi);
                for (r, s) in rec.iter_mut().zip(&psi) {
                    *r += weight * c * s;
                }
            }
        }
    }
    let diff: Vec<f64> = rec.iter().zip(&chi).map(|(a, b)| a - b).collect();
    Ok((half_line_inner(&q, &diff, &diff) / half_line_inner(&q, &chi, &chi)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bound_energy_and_norm() {
        let m = DeltaWell::new(1.0).unwrap();
        assert_eq!(m.omega0(), -0.5);
        assert!(DeltaWell::new(0.0).is_err());
        assert!(DeltaWell::new(-1.0).is_err());
        // matching condition at the origin: ψ'(0+) − ψ'(0−) = −2κ ψ(0)
        let m = DeltaWell::with_hbar(1.7, 0.6).unwrap();
        let e = 1e-8;
        let right = (m.bound_state(2.0 * e) - m.bound_state(e)) / e;
        let left = (m.bound_state(-e) - m.bound_state(-2.0 * e)) / e;
        let expect = -2.0 * m.kappa() * m.bound_state(0.0);
        assert!(((right - left) - expect).abs() < 1e-5 * expect.abs());
        assert_abs_diff_eq!(m.omega0(), -1.7 * 1.7 / (2.0 * 0.36), epsilon = 1e-14);
    }

    #[test]
    fn even_state_satisfies_matching_condition() {
        let m = DeltaWell::with_hbar(1.3, 0.8).unwrap();
        let w = 2.2;
        let e = 1e-7;
        let right = (m.even(w, 2.0 * e) - m.even(w, e)) / e;
        let left = (m.even(w, -e) - m.even(w, -2.0 * e)) / e;
        assert!(((right - left) + 2.0 * m.kappa() * m.even(w, 0.0)).abs() < 1e-5);
    }

    #[test]
    fn check_on_grid() {
        let g = 1.0;
        let m = DeltaWell::new(g).unwrap();
        let r = eigenfunction_check(&m, 20.0 / g, 2049, &[0.5, 2.0, 5.0]).unwrap();
        assert!(r.bound_residual < 1e-4, "{}", r.bound_residual);
        assert!((r.bound_norm - 1.0).abs() < 1e-7);
        for &(_, ov) in &r.bound_even_overlaps {
            assert!(ov < 1e-6, "{ov}");
        }
        for &(_, ov) in &r.even_odd_overlaps {
            assert!(ov < 1e-10);
        }
    }

    #[test]
    fn free_limit_phase_shift_vanishes() {
        let w = 1.5;
        let shifts: Vec<f64> =
            [1.0, 1e-2, 1e-4, 1e-8].iter().map(|&g| DeltaWell::new(g).unwrap().phase_shift(w)).collect();
        assert!(shifts.windows(2).all(|p| p[1] < p[0]));
        assert!(shifts[3] < 1e-8);
        // tan δ = g/k at ħ = 1
        assert_abs_diff_eq!(shifts[0].tan(), 1.0 / (2.0 * w).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn parity_is_exact() {
        let m = DeltaWell::with_hbar(0.7, 0.5).unwrap();
        for &q in &[0.1, 1.3, 7.9] {
            assert_eq!(m.even(3.0, q), m.even(3.0, -q));
            assert_eq!(m.odd(3.0, q), -m.odd(3.0, -q));
        }
    }

    #[test]
    fn truncated_completeness() {
        let m = DeltaWell::new(1.0).unwrap();
        for center in [1.5, 4.0] {
            let defect = completeness_defect(&m, 50.0, center, 0.5).unwrap();
            assert!(defect < 1e-2, "{center}: {defect}");
        }
        // a profile that ignores the matching condition converges only algebraically
        let near = completeness_defect(&m, 50.0, 0.0, 0.5).unwrap();
        let far = completeness_defect(&m, 200.0, 0.0, 0.5).unwrap();
        assert!(far < near && near < 5e-2);
    }

    #[test]
    fn packet_amplitudes_match_plane_wave_transform() {
        let m = DeltaWell::with_hbar(1.0, 0.5).unwrap();
        let grid = m.spectrum_grid(60.0, 30, 16).unwrap();
        let (q0, sigma, p0) = (5.0, 0.5, 4.0);
        let amps = m.gaussian_packet(&grid, q0, sigma, p0).unwrap();
        // away from the origin the eigenfunctions are plane waves, so the
        // projections follow from the Gaussian's Fourier transform
        let k0 = p0 / m.hbar();
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25) * 2.0 * sigma * PI.sqrt();
        let fourier = |k: f64| C64::from_polar(norm * (-(sigma * (k - k0)).powi(2)).exp(), -k * q0);
        for k in [40, 200, 333] {
            let omega = grid.nodes()[k];
            let (kk, a) = (m.wavenumber(omega), m.normalization(omega));
            let d = C64::from_polar(1.0, m.phase_shift(omega));
            let even = 0.5 * a * (d.conj() * fourier(kk) + d * fourier(-kk));
            let odd = 0.5 * a * (fourier(-kk) - fourier(kk)) / C64::i();
            assert!((even - amps.continuum[k][EVEN]).norm() < 1e-9, "{k}");
            assert!((odd - amps.continuum[k][ODD]).norm() < 1e-9, "{k}");
        }
        assert!((amps.norm_sqr(&grid) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn packet_over_the_well_loses_mass_algebraically() {
        let m = DeltaWell::new(1.0).unwrap();
        let missing = |w: f64| {
            let grid = m.spectrum_grid(w, w as usize, 16).unwrap();
            1.0 - m.gaussian_packet(&grid, 0.3, 0.5, 8.0).unwrap().norm_sqr(&grid)
        };
        let (a, b) = (missing(130.0), missing(520.0));
        // coefficients fall like k^{-5/2}, so the mass beyond k_max like k_max^{-3}
        let rate = (a / b).log2() / 2.0;
        assert!(a > 1e-6 && (rate - 1.5).abs() < 0.25, "{a} {b} {rate}");
    }

    #[test]
    fn simpson_exact_for_cubics() {
        for n in [4usize, 7] {
            let h = 1.0 / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
            assert_abs_diff_eq!(simpson(&f, h), 0.25, epsilon = 1e-14);
        }
    }
}
