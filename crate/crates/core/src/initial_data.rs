//! Named families of radial initial data `(u₀, u₁)` with `u₁ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::evolution::WaveState;
use crate::functionals::cutoff_value;
use crate::grid::{RadialField, RadialGrid};
use crate::ground_state;

/// Default radius where the ground-state profile starts to be cut off.
pub const DEFAULT_CUTOFF: f64 = 8.0;

fn one() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataFamily {
    /// `a · W_λ(r) · φ_{R_c}(r)`; the smooth cutoff gives support `2 R_c`.
    ScaledGroundState {
        a: f64,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// `A exp(-((r - c)/w)²)`.
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    /// `A e · exp(-1/(1 - x²))` for `x = (r - c)/w`, `|x| < 1`; peak value `A`.
    CompactBump { amplitude: f64, center: f64, width: f64 },
}

impl DataFamily {
    pub fn scaled_ground_state(a: f64) -> Self {
        Self::ScaledGroundState {
            a,
            lambda: 1.0,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ScaledGroundState { a, lambda, cutoff } => {
                if !a.is_finite() {
                    return Err(invalid("a", "must be finite"));
                }
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda", format!("need lambda > 0, got {lambda}")));
                }
                if !(*cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(invalid("cutoff", format!("need cutoff > 0, got {cutoff}")));
                }
            }
            Self::GaussianBump { amplitude, center, width } | Self::CompactBump { amplitude, center, width } => {
                if !amplitude.is_finite() {
                    return Err(invalid("amplitude", "must be finite"));
                }
                if !(*center >= 0.0 && center.is_finite()) {
                    return Err(invalid("center", format!("need center >= 0, got {center}")));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(invalid("width", format!("need width > 0, got {width}")));
                }
            }
        }
        Ok(())
    }

    /// Radial profile `u₀(r)`.
    pub fn profile(&self, d: usize, r: f64) -> f64 {
        match *self {
            Self::ScaledGroundState { a, lambda, cutoff } => {
                let amp = lambda.powf(-(d as f64 - 2.0) / 2.0);
                a * amp * ground_state::value(d, r / lambda) * cutoff_value(r, cutoff)
            }
            Self::GaussianBump { amplitude, center, width } => {
                let x = (r - center) / width;
                amplitude * (-x * x).exp()
            }
            Self::CompactBump { amplitude, center, width } => {
                let x = (r - center) / width;
                if x.abs() < 1.0 {
                    amplitude * std::f64::consts::E * (-1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn build(&self, grid: &RadialGrid) -> Result<WaveState> {
        self.validate()?;
        let d = grid.dim();
        let u = RadialField::from_fn(grid, |r| self.profile(d, r));
        WaveState::new(u, RadialField::zeros(grid), 0.0)
    }

    /// Radius beyond which the profile is below the solver's support
    /// tolerance; used to size the domain before a grid exists.
    pub fn support_estimate(&self) -> f64 {
        match *self {
            Self::ScaledGroundState { cutoff, .. } => 2.0 * cutoff,
            Self::GaussianBump { amplitude, center, width } => {
                let ratio = amplitude.abs().max(1.0) / crate::evolution::SUPPORT_TOL;
                center + width * ratio.ln().sqrt()
            }
            Self::CompactBump { center, width, .. } => center + width,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::ScaledGroundState { a, lambda, cutoff } => {
                format!("{a}*W[lambda={lambda}]*cutoff({cutoff})")
            }
            Self::GaussianBump { amplitude, center, width } => {
                format!("gaussian(A={amplitude}, c={center}, w={width})")
            }
            Self::CompactBump { amplitude, center, width } => {
                format!("bump(A={amplitude}, c={center}, w={width})")
            }
        }
    }
}

/// Smallest `r_max` with `r_max >= support + t_final + 2 r_max/n`.
pub fn auto_r_max(support: f64, t_final: f64, n: usize) -> f64 {
    (support + t_final) / (1.0 - 2.0 / n as f64) * (1.0 + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{required_domain_radius, support_radius};
    use approx::assert_relative_eq;

    #[test]
    fn ground_state_profile() {
        let f = DataFamily::scaled_ground_state(1.5);
        assert_relative_eq!(f.profile(3, 0.0), 1.5);
        assert_relative_eq!(f.profile(3, 3f64.sqrt()), 1.5 * 0.5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(f.profile(3, 16.0), 0.0);
        assert_eq!(f.support_estimate(), 16.0);
    }

    #[test]
    fn json_shape() {
        let f: DataFamily = serde_json::from_str(r#"{"kind":"scaled_ground_state","a":0.5}"#).unwrap();
        assert_eq!(f, DataFamily::scaled_ground_state(0.5));
    }

    #[test]
    fn support_estimates_cover_measured_support() {
        let fams = [
            DataFamily::scaled_ground_state(2.0),
            DataFamily::GaussianBump {
                amplitude: 3.0,
                center: 5.0,
                width: 1.0,
            },
            DataFamily::CompactBump {
                amplitude: 1.0,
                center: 4.0,
                width: 2.0,
            },
        ];
        for f in fams {
            let g = RadialGrid::new(3, 40.0, 4000).unwrap();
            let s = f.build(&g).unwrap();
            assert!(support_radius(&s) <= f.support_estimate(), "{}", f.label());
        }
    }

    #[test]
    fn auto_radius_satisfies_requirement() {
        let n = 4096;
        let r = auto_r_max(16.0, 10.0, n);
        assert!(r >= required_domain_radius(16.0, 10.0, r / n as f64));
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = DataFamily::ScaledGroundState {
            a: 1.0,
            lambda: 0.0,
            cutoff: 8.0,
        };
        assert!(bad.validate().is_err());
        let bad = DataFamily::GaussianBump {
            amplitude: 1.0,
            center: 0.0,
            width: -1.0,
        };
        assert!(bad.validate().is_err());
    }
}
