//! Experiment descriptions in TOML.
//!
//! Every table rejects unknown keys. [`ExperimentConfig::parse`] checks
//! numeric ranges before anything is built, and the `build` methods turn
//! each section into model objects.

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::dynamics::{log_times, QuadratureMode};
use crate::error::{Error, Result};
use crate::fixtures::{outer, Fixtures};
use crate::pointer::{pointer_observables, Basis, PointerTransform};
use crate::profile::Profile;
use crate::spectral::{Amplitudes, CMat, CVec, ObservableFn, QuantumNumbers, SpectrumGrid, StateFn};

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_error(msg()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub spectrum: Option<SpectrumSpec>,
    pub state: Option<StateSpec>,
    pub observable: Option<ObservableSpec>,
    pub evolve: Option<EvolveSpec>,
    pub pointer: Option<PointerSpec>,
    pub wigner: Option<WignerSpec>,
    pub check: Option<CheckSpec>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.spectrum {
            s.validate()?;
        }
        if let Some(s) = &self.state {
            s.validate()?;
        }
        if let Some(o) = &self.observable {
            o.validate()?;
        }
        if let Some(e) = &self.evolve {
            e.validate()?;
        }
        if let Some(p) = &self.pointer {
            if let Some(s) = &p.secondary {
                s.validate()?;
            }
            require(p.max_moment <= 16, || format!("pointer.max_moment = {} exceeds 16", p.max_moment))?;
        }
        if let Some(w) = &self.wigner {
            w.validate()?;
        }
        if let Some(c) = &self.check {
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub omega0: f64,
    pub omega_max: f64,
    pub panels: usize,
    pub order: usize,
    #[serde(default)]
    pub labels: LabelsSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelsSpec {
    #[default]
    Single,
    Parity,
    Range(usize),
    Custom(Vec<Vec<i64>>),
}

impl SpectrumSpec {
    fn validate(&self) -> Result<()> {
        require(self.omega0 < 0.0 && self.omega0.is_finite(), || {
            format!("spectrum.omega0 = {} must be negative", self.omega0)
        })?;
        require(self.omega_max > 0.0 && self.omega_max.is_finite(), || {
            format!("spectrum.omega_max = {} must be positive", self.omega_max)
        })?;
        require(self.panels >= 1, || "spectrum.panels must be at least 1".into())?;
        require((2..=64).contains(&self.order), || format!("spectrum.order = {} outside 2..=64", self.order))?;
        if let LabelsSpec::Range(n) = self.labels {
            require(n >= 1, || "labels.range must be at least 1".into())?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(Arc<SpectrumGrid>, Arc<QuantumNumbers>)> {
        let grid = SpectrumGrid::new(self.omega0, self.omega_max, self.panels, self.order)?;
        let qnums = match &self.labels {
            LabelsSpec::Single => QuantumNumbers::single(),
            LabelsSpec::Parity => QuantumNumbers::parity(),
            LabelsSpec::Range(n) => QuantumNumbers::range(*n)?,
            LabelsSpec::Custom(l) => QuantumNumbers::new(l.clone())?,
        };
        Ok((Arc::new(grid), Arc::new(qnums)))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `Σ_r b_r|ω₀ r⟩ + ∫ f_r(ω)|ω r⟩`, normalized; `bound` holds `[re, im]` pairs.
    Pure {
        #[serde(default)]
        bound: Vec<[f64; 2]>,
        profiles: Vec<Profile>,
    },
    /// `ρ_r(ω₀) = bound[r]`, `ρ_r(ω) = |f_r(ω)|²`, no coherences, normalized.
    EnergyDiagonal {
        #[serde(default)]
        bound: Vec<f64>,
        profiles: Vec<Profile>,
    },
    /// `ρ(ω₀) = b·M`, `ρ(ω) = |f(ω)|²·M` for a real symmetric label matrix `M`.
    Factorized { matrix: Vec<Vec<f64>>, bound_weight: f64, profile: Profile },
    /// A seeded mixture of `rank` random pure states.
    Random { rank: usize },
}

impl StateSpec {
    fn validate(&self) -> Result<()> {
        match self {
            StateSpec::Pure { profiles, .. } | StateSpec::EnergyDiagonal { profiles, .. } => {
                require(!profiles.is_empty(), || "state.profiles must list one profile per label".into())?;
                profiles.iter().try_for_each(Profile::check).map_err(|e| config_error(e.to_string()))
            }
            StateSpec::Factorized { matrix, bound_weight, profile } => {
                let d = matrix.len();
                require(d > 0 && matrix.iter().all(|r| r.len() == d), || "state.matrix must be square".into())?;
                require((0..d).all(|i| (0..d).all(|j| matrix[i][j] == matrix[j][i])), || {
                    "state.matrix must be symmetric".into()
                })?;
                require(*bound_weight >= 0.0, || "state.bound_weight must be non-negative".into())?;
                profile.check().map_err(|e| config_error(e.to_string()))
            }
            StateSpec::Random { rank } => require(*rank >= 1, || "state.rank must be at least 1".into()),
        }
    }

    pub fn build(&self, grid: &Arc<SpectrumGrid>, qnums: &Arc<QuantumNumbers>, fx: &mut Fixtures) -> Result<StateFn> {
        let d = qnums.len();
        let labels = |n: usize| {
            require(n == d, || format!("state lists {n} labels but the spectrum has {d}"))
        };
        match self {
            StateSpec::Pure { bound, profiles } => {
                labels(profiles.len())?;
                let mut b: Vec<C64> = bound.iter().map(|z| C64::new(z[0], z[1])).collect();
                require(b.len() <= d, || format!("state.bound has {} entries for {d} labels", b.len()))?;
                b.resize(d, C64::new(0.0, 0.0));
                let amps = Amplitudes::from_profiles(grid, &b, profiles)?;
                StateFn::pure(grid.clone(), qnums.clone(), &amps)
            }
            StateSpec::EnergyDiagonal { bound, profiles } => {
                labels(profiles.len())?;
                require(bound.len() <= d, || format!("state.bound has {} entries for {d} labels", bound.len()))?;
                let mut b = CMat::zeros(d, d);
                for (r, &v) in bound.iter().enumerate() {
                    b[(r, r)] = C64::new(v, 0.0);
                }
                let continuum = grid
                    .nodes()
                    .iter()
                    .map(|&w| CMat::from_diagonal(&CVec::from_iterator(d, profiles.iter().map(|p| C64::new(p.eval(w).norm_sqr(), 0.0)))))
                    .collect();
                StateFn::energy_diagonal(grid.clone(), qnums.clone(), b, continuum)
            }
            StateSpec::Factorized { matrix, bound_weight, profile } => {
                labels(matrix.len())?;
                let m = CMat::from_fn(d, d, |i, j| C64::new(matrix[i][j], 0.0));
                let continuum = grid.nodes().iter().map(|&w| &m * C64::new(profile.eval(w).norm_sqr(), 0.0)).collect();
                StateFn::energy_diagonal(grid.clone(), qnums.clone(), &m * C64::new(*bound_weight, 0.0), continuum)
            }
            StateSpec::Random { rank } => fx.state(grid, qnums, *rank),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Identity,
    Hamiltonian,
    /// `f(H)` with `f(ω) = Re profile(max(ω, 0))`.
    EnergyFunction { profile: Profile },
    /// The label value `r_axis` on every sector.
    Label {
        #[serde(default)]
        axis: usize,
    },
    /// `|a⟩⟨a|` with `a_r(ω) = profile(ω)` on every label and no bound component.
    Coherence { profile: Profile },
    /// A seeded random self-adjoint observable.
    Random,
}

impl ObservableSpec {
    fn validate(&self) -> Result<()> {
        match self {
            ObservableSpec::EnergyFunction { profile } | ObservableSpec::Coherence { profile } => {
                profile.check().map_err(|e| config_error(e.to_string()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_energy_diagonal(&self) -> bool {
        !matches!(self, ObservableSpec::Coherence { .. } | ObservableSpec::Random)
    }

    pub fn build(
        &self,
        grid: &Arc<SpectrumGrid>,
        qnums: &Arc<QuantumNumbers>,
        fx: &mut Fixtures,
    ) -> Result<ObservableFn> {
        let (g, q) = (grid.clone(), qnums.clone());
        match self {
            ObservableSpec::Identity => Ok(ObservableFn::identity(g, q)),
            ObservableSpec::Hamiltonian => Ok(ObservableFn::hamiltonian(g, q)),
            ObservableSpec::EnergyFunction { profile } => {
                Ok(ObservableFn::energy_function(g, q, |w| profile.eval(w.max(0.0)).re))
            }
            ObservableSpec::Label { axis } => {
                let n = qnums.n_axes();
                require(*axis < n, || format!("observable.axis = {axis} but labels have {n} axes"))?;
                Ok(pointer_observables(&PointerTransform::identity(g, q), Basis::Original).swap_remove(*axis))
            }
            ObservableSpec::Coherence { profile } => {
                let d = qnums.len();
                let a = Amplitudes {
                    bound: CVec::zeros(d),
                    continuum: grid.nodes().iter().map(|&w| CVec::from_element(d, profile.eval(w))).collect(),
                };
                ObservableFn::new(g, q, outer(&a, &a))
            }
            ObservableSpec::Random => fx.observable(grid, qnums),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub times: TimesSpec,
    #[serde(default)]
    pub mode: QuadratureMode,
    pub dyadic: Option<DyadicSpec>,
}

impl EvolveSpec {
    fn validate(&self) -> Result<()> {
        self.times.times().map(|_| ())?;
        if let Some(d) = &self.dyadic {
            require(d.t0 > 0.0 && d.levels >= 2 && d.samples >= 1, || {
                "evolve.dyadic needs t0 > 0, levels >= 2 and samples >= 1".into()
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicSpec {
    pub t0: f64,
    pub levels: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimesSpec {
    Linear { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
    List { values: Vec<f64> },
}

impl TimesSpec {
    pub fn times(&self) -> Result<Vec<f64>> {
        let t = match *self {
            TimesSpec::Linear { start, stop, count } => {
                require(count >= 2 && stop > start && start >= 0.0, || {
                    format!("linear times need 0 <= start < stop and count >= 2, got [{start}, {stop}] x {count}")
                })?;
                (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()
            }
            TimesSpec::Log { start, stop, count } => log_times(start, stop, count).map_err(|e| config_error(e.to_string()))?,
            TimesSpec::List { ref values } => values.clone(),
        };
        require(!t.is_empty() && t.windows(2).all(|p| p[1] > p[0]) && t.iter().all(|v| v.is_finite()), || {
            "times must be finite and strictly increasing".into()
        })?;
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerSpec {
    pub secondary: Option<ObservableSpec>,
    #[serde(default = "default_max_moment")]
    pub max_moment: u32,
}

fn default_max_moment() -> u32 {
    8
}

/// A Gaussian packet on the delta well, cut off smoothly in momentum.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub q0: f64,
    pub sigma: f64,
    pub p0: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    #[serde(default = "unit")]
    pub coupling: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
    pub packet: PacketSpec,
    /// Energy-diagonal observables paired in phase space against the packet.
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    /// Width of the Gaussian smearing of the classical energy density.
    #[serde(default = "default_smearing")]
    pub smearing: f64,
    pub scaling: Option<ScalingSpec>,
}

fn unit() -> f64 {
    1.0
}

fn default_smearing() -> f64 {
    0.25
}

impl WignerSpec {
    fn validate(&self) -> Result<()> {
        require(self.coupling > 0.0 && self.hbar > 0.0, || "wigner.coupling and wigner.hbar must be positive".into())?;
        validate_packet(&self.packet, "wigner.packet")?;
        for o in &self.observables {
            o.validate()?;
            require(!matches!(o, ObservableSpec::Random), || "wigner.observables cannot be random".into())?;
        }
        require(self.smearing > 0.0, || "wigner.smearing must be positive".into())?;
        if let Some(s) = &self.scaling {
            s.validate()?;
        }
        Ok(())
    }
}

fn validate_packet(p: &PacketSpec, name: &str) -> Result<()> {
    require(p.sigma > 0.0 && p.half_width > 0.0 && p.q0.is_finite() && p.p0.is_finite(), || {
        format!("{name} needs finite q0, p0 and positive sigma, half_width")
    })?;
    require(p.q0.abs() < p.half_width, || format!("{name}.q0 lies outside [-half_width, half_width]"))
}

/// Families over `ħ`: packets with `σ = sigma·√ħ` on `[−L(ħ), L(ħ)]` for the
/// flow residual, energy-function pairs for the product residual.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub hbars: Vec<f64>,
    pub q_cut: f64,
    pub flow: Option<FlowFamily>,
    pub products: Option<ProductFamily>,
}

impl ScalingSpec {
    fn validate(&self) -> Result<()> {
        require(self.hbars.len() >= 2 && self.hbars.iter().all(|&h| h > 0.0), || {
            "scaling.hbars needs at least two positive values".into()
        })?;
        require(self.q_cut > 0.0, || "scaling.q_cut must be positive".into())?;
        if let Some(f) = &self.flow {
            require(f.sigma > 0.0 && f.half_width.base > 0.0 && f.half_width.per_hbar >= 0.0, || {
                "scaling.flow needs positive sigma and half_width".into()
            })?;
        }
        if let Some(p) = &self.products {
            require(p.p_max > 0.0 && p.half_width > p.q_outer && p.q_outer > self.q_cut, || {
                "scaling.products needs p_max > 0 and q_cut < q_outer < half_width".into()
            })?;
            require(!p.pairs.is_empty(), || "scaling.products.pairs is empty".into())?;
            for pair in &p.pairs {
                for o in [&pair.left, &pair.right] {
                    o.validate()?;
                    require(o.is_energy_diagonal(), || "product observables must be energy-diagonal".into())?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub base: f64,
    pub per_hbar: f64,
}

impl Affine {
    pub fn at(&self, hbar: f64) -> f64 {
        self.base + self.per_hbar * hbar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFamily {
    pub q0: f64,
    pub sigma: f64,
    pub p0: f64,
    pub half_width: Affine,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductFamily {
    pub p_max: f64,
    pub half_width: f64,
    pub q_outer: f64,
    pub pairs: Vec<ProductPair>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductPair {
    pub left: ObservableSpec,
    pub right: ObservableSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "default_cases")]
    pub cases: usize,
    /// Anti-Hermitian perturbation added to one random observable; a nonzero
    /// value must make the suite fail.
    #[serde(default)]
    pub break_hermiticity: f64,
}

fn default_cases() -> usize {
    20
}

impl CheckSpec {
    fn validate(&self) -> Result<()> {
        require(self.cases >= 1, || "check.cases must be at least 1".into())?;
        require(self.break_hermiticity.is_finite() && self.break_hermiticity >= 0.0, || {
            "check.break_hermiticity must be finite and non-negative".into()
        })
    }
}
