//! Named amplitude profiles sampled onto continuum nodes.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma};

use crate::error::{invalid, Result};

/// A smooth complex amplitude `f(ω)` on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `A · exp(−((ω − center)/width)²)`
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `A · ωⁿ · exp(−rate·ω)`
    PolyExp {
        power: u32,
        rate: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    Sum { terms: Vec<Profile> },
    /// Not square-integrable; usable in observable kernels only.
    Constant { value: f64 },
    Zero,
}

fn unit() -> f64 {
    1.0
}

impl Profile {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Profile::Gaussian { center, width, amplitude: 1.0, phase: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Profile::Gaussian { center, width, amplitude, phase } => {
                if !(center.is_finite() && amplitude.is_finite() && phase.is_finite()) {
                    return Err(invalid("profile", "non-finite Gaussian parameter"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(invalid("width", format!("{width} must be positive")));
                }
            }
            Profile::PolyExp { rate, amplitude, phase, .. } => {
                if !(amplitude.is_finite() && phase.is_finite()) {
                    return Err(invalid("profile", "non-finite poly-exp parameter"));
                }
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid("rate", format!("{rate} must be positive")));
                }
            }
            Profile::Sum { terms } => terms.iter().try_for_each(Profile::check)?,
            Profile::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("value", "constant profile must be finite"));
                }
            }
            Profile::Zero => {}
        }
        Ok(())
    }

    pub fn eval(&self, omega: f64) -> C64 {
        match *self {
            Profile::Gaussian { center, width, amplitude, phase } => {
                let z = (omega - center) / width;
                C64::from_polar(amplitude * (-z * z).exp(), phase)
            }
            Profile::PolyExp { power, rate, amplitude, phase } => {
                C64::from_polar(amplitude * omega.powi(power as i32) * (-rate * omega).exp(), phase)
            }
            Profile::Sum { ref terms } => terms.iter().map(|p| p.eval(omega)).sum(),
            Profile::Constant { value } => C64::new(value, 0.0),
            Profile::Zero => C64::new(0.0, 0.0),
        }
    }

    /// `∫_{ω_max}^∞ |f(ω)|² dω`, exact for single terms and a Minkowski bound for sums.
    pub fn tail_mass(&self, omega_max: f64) -> f64 {
        match *self {
            Profile::Gaussian { center, width, amplitude, .. } => {
                let s = std::f64::consts::SQRT_2;
                amplitude * amplitude * width / s * std::f64::consts::PI.sqrt() / 2.0
                    * erfc(s * (omega_max - center) / width)
            }
            Profile::PolyExp { power, rate, amplitude, .. } => {
                let a = 2.0 * power as f64 + 1.0;
                let x = 2.0 * rate * omega_max;
                amplitude * amplitude * gamma::gamma_ur(a, x) * gamma::gamma(a) / (2.0 * rate).powf(a)
            }
            Profile::Sum { ref terms } => {
                let root: f64 = terms.iter().map(|p| p.tail_mass(omega_max).sqrt()).sum();
                root * root
            }
            Profile::Constant { value } if value == 0.0 => 0.0,
            Profile::Constant { .. } => f64::INFINITY,
            Profile::Zero => 0.0,
        }
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<C64> {
        nodes.iter().map(|&w| self.eval(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::CompositeRule;

    #[test]
    fn tail_mass_matches_quadrature() {
        let cut = 1.5;
        let rule = CompositeRule::new(cut, 40.0, 40, 12).unwrap();
        for p in [
            Profile::gaussian(1.0, 0.4),
            Profile::PolyExp { power: 2, rate: 0.7, amplitude: 1.3, phase: 0.2 },
        ] {
            let numeric = rule.integrate(|w| p.eval(w).norm_sqr());
            assert!((numeric - p.tail_mass(cut)).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn rejects_nonpositive_width() {
        assert!(Profile::gaussian(1.0, 0.0).check().is_err());
    }

    #[test]
    fn parses_tagged_toml() {
        let p: Profile = toml::from_str("kind = \"gaussian\"\ncenter = 1.0\nwidth = 0.2\n").unwrap();
        assert_eq!(p, Profile::gaussian(1.0, 0.2));
    }
}
