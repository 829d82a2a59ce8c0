pub mod classical;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod profile;
pub mod model;
pub mod pointer;
pub mod quadrature;
pub mod spectral;
pub mod wigner;

pub use error::{Error, Result};
