use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state and observable live on different spectrum grids or label sets")]
    GridMismatch,

    #[error("hermiticity violated by {defect:.3e} (tolerance {tolerance:.0e}); use `symmetrize` explicitly")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("negative diagonal weight {value:.3e}")]
    NegativeWeight { value: f64 },

    #[error("normalization (rho|I) = {value:.12} differs from 1")]
    NotNormalized { value: f64 },

    #[error("profile `{profile}` carries tail mass {mass:.3e} beyond omega_max")]
    TailMass { profile: String, mass: f64 },

    #[error(
        "oscillation unresolved at t = {t}: max node spacing {spacing:.3e} gives {phase:.3} rad per step \
         (limit pi/4); use about {required_nodes} nodes or enable Filon mode"
    )]
    Resolution { t: f64, spacing: f64, phase: f64, required_nodes: usize },

    #[error("observable has nonzero energy-off-diagonal blocks; only energy-diagonal operators are supported here")]
    NotEnergyDiagonal,

    #[error("state is not diagonal in the supplied basis (off-diagonal magnitude {defect:.3e})")]
    NotDiagonal { defect: f64 },

    #[error("eigenvector tracking failed at continuum node {node}: overlap {overlap:.3} below 0.5")]
    Tracking { node: usize, overlap: f64 },

    #[error(
        "position grid too coarse: k_max = {wavenumber:.3} with dq = {spacing:.3e} exceeds pi/4 per step; \
         use at least {required_points} points"
    )]
    Unresolved { wavenumber: f64, spacing: f64, required_points: usize },

    #[error("kernel does not decay at the lambda boundary: |K| = {value:.3e} (limit 1e-8)")]
    KernelDecay { value: f64 },

    #[error("state is not a trace-class density: {0}")]
    NotTraceClass(String),

    #[error("config: {0}")]
    Config(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
