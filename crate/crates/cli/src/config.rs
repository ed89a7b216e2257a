//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use critwave_core::coefficients::CoefficientSpec;
use critwave_core::evolution::{required_domain_radius, Sign, SolverConfig, WaveState, H_CAP_FACTOR_DEFAULT, SUP_CAP_DEFAULT};
use critwave_core::functionals::DiagnosticsConfig;
use critwave_core::grid::RadialGrid;
use critwave_core::hyperbolic::{t_forward, transformed_coefficient, H3Family, H3RadialField};
use critwave_core::initial_data::{auto_r_max, DataFamily};

pub const SCHEMA: u32 = 1;
pub const OUT_ENV: &str = "CRITWAVE_OUT";
pub const DEFAULT_OUT: &str = "critwave-out";

/// A configuration problem found before any computation starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError {
        field: field.to_owned(),
        message: message.to_string(),
    }
}

/// `"auto"` or an explicit radius.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DomainRadius {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for DomainRadius {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(r) => s.serialize_f64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for DomainRadius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(r) => Ok(Self::Fixed(r)),
            Raw::Text(t) if t == "auto" => Ok(Self::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("r_max must be a number or \"auto\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub r_max: DomainRadius,
    pub n: usize,
}

/// Euclidean data, or `ℍ³` data under the key `h3_family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSpec {
    Hyperbolic { h3_family: H3Family },
    Euclidean(DataFamily),
}

impl DataSpec {
    pub fn support_estimate(&self) -> f64 {
        match self {
            Self::Hyperbolic { h3_family } => h3_family.support_estimate(),
            Self::Euclidean(f) => f.support_estimate(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Hyperbolic { h3_family } => h3_family.label(),
            Self::Euclidean(f) => f.label(),
        }
    }

    /// Copy with the amplitude parameter replaced, for sweeps.
    pub fn with_amplitude(&self, a: f64) -> Option<Self> {
        match self.clone() {
            Self::Euclidean(DataFamily::ScaledGroundState { lambda, cutoff, .. }) => {
                Some(Self::Euclidean(DataFamily::ScaledGroundState { a, lambda, cutoff }))
            }
            Self::Euclidean(DataFamily::GaussianBump { center, width, .. }) => Some(Self::Euclidean(DataFamily::GaussianBump {
                amplitude: a,
                center,
                width,
            })),
            Self::Euclidean(DataFamily::CompactBump { center, width, .. }) => Some(Self::Euclidean(DataFamily::CompactBump {
                amplitude: a,
                center,
                width,
            })),
            Self::Hyperbolic {
                h3_family: H3Family::PulledBackGroundState { lambda, cutoff, .. },
            } => Some(Self::Hyperbolic {
                h3_family: H3Family::PulledBackGroundState { a, lambda, cutoff },
            }),
            Self::Hyperbolic {
                h3_family: H3Family::CompactBump { center, width, .. },
            } => Some(Self::Hyperbolic {
                h3_family: H3Family::CompactBump {
                    amplitude: a,
                    center,
                    width,
                },
            }),
        }
    }
}

fn default_sup_cap() -> f64 {
    SUP_CAP_DEFAULT
}

fn default_h_cap() -> f64 {
    H_CAP_FACTOR_DEFAULT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: f64,
    pub t_final: f64,
    #[serde(default = "default_sup_cap")]
    pub sup_cap: f64,
    /// Multiple of `‖∇W‖`.
    #[serde(default = "default_h_cap")]
    pub h_cap: f64,
}

fn default_interval() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Time between trace rows.
    #[serde(default = "default_interval")]
    pub interval: f64,
    /// Virial cutoff radius; `r_max/2` when absent.
    #[serde(default)]
    pub cutoff_radius: Option<f64>,
    /// Energy-trapping margin; derived from the energy gap when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Repeat the run at `2n` to confirm the outcome.
    #[serde(default = "yes")]
    pub refine: bool,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            interval: default_interval(),
            cutoff_radius: None,
            delta: None,
            refine: true,
        }
    }
}

fn schema_one() -> u32 {
    SCHEMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_one")]
    pub schema: u32,
    pub dimension: usize,
    pub grid: GridSection,
    /// Required for Euclidean data; fixed to `sinh_power(4)` for `ℍ³` data.
    #[serde(default)]
    pub coefficient: Option<CoefficientSpec>,
    /// `+1` focusing, `-1` defocusing; fixed to `+1` for `ℍ³` data.
    #[serde(default)]
    pub sign: Option<Sign>,
    pub data: DataSpec,
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad("<document>", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self.data, DataSpec::Hyperbolic { .. })
    }

    pub fn coefficient(&self) -> CoefficientSpec {
        match (&self.data, &self.coefficient) {
            (DataSpec::Hyperbolic { .. }, _) => transformed_coefficient(),
            (_, Some(c)) => c.clone(),
            (_, None) => CoefficientSpec::constant(1.0),
        }
    }

    pub fn sign(&self) -> Sign {
        if self.is_hyperbolic() {
            Sign::Focusing
        } else {
            self.sign.unwrap_or(Sign::Focusing)
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.solver.cfl,
            t_final: self.solver.t_final,
            sign: self.sign(),
            coefficient: self.coefficient(),
            blowup_sup_cap: self.solver.sup_cap,
            blowup_h_cap: self.solver.h_cap,
            diagnostic_interval: self.diagnostics.interval,
        }
    }

    pub fn diagnostics_config(&self) -> DiagnosticsConfig {
        DiagnosticsConfig {
            cutoff_radius: self.diagnostics.cutoff_radius,
        }
    }

    /// Checks every field; nothing is run before this passes.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA {
            return Err(bad("schema", format!("expected {SCHEMA}, got {}", self.schema)));
        }
        if !(3..=5).contains(&self.dimension) {
            return Err(bad("dimension", format!("expected 3, 4 or 5, got {}", self.dimension)));
        }
        if self.grid.n < 16 {
            return Err(bad("grid.n", format!("need at least 16 cells, got {}", self.grid.n)));
        }
        match &self.data {
            DataSpec::Hyperbolic { h3_family } => {
                if self.dimension != 3 {
                    return Err(bad("dimension", "h3_family data requires dimension 3"));
                }
                if self.coefficient.as_ref().is_some_and(|c| *c != transformed_coefficient()) {
                    return Err(bad("coefficient", "h3_family data fixes the coefficient to sinh_power(4)"));
                }
                if self.sign == Some(Sign::Defocusing) {
                    return Err(bad("sign", "h3_family data is focusing"));
                }
                h3_family.validate().map_err(|e| bad("data", e))?;
            }
            DataSpec::Euclidean(f) => {
                if self.coefficient.is_none() {
                    return Err(bad("coefficient", "required for Euclidean data"));
                }
                if self.sign.is_none() {
                    return Err(bad("sign", "required: 1 (focusing) or -1 (defocusing)"));
                }
                f.validate().map_err(|e| bad("data", e))?;
            }
        }
        self.coefficient().validate().map_err(|e| bad("coefficient", e))?;
        self.solver_config().validate(self.dimension).map_err(|e| bad("solver", e))?;
        if let Some(r) = self.diagnostics.cutoff_radius {
            if !(r > 0.0) {
                return Err(bad("diagnostics.cutoff_radius", "must be positive"));
            }
        }
        if let Some(delta) = self.diagnostics.delta {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(bad("diagnostics.delta", "need 0 < delta < 1"));
            }
        }
        let grid = self.grid()?;
        if let Some(r) = self.diagnostics.cutoff_radius {
            if r > grid.r_max() / 2.0 {
                return Err(bad(
                    "diagnostics.cutoff_radius",
                    format!("must be at most r_max/2 = {}", grid.r_max() / 2.0),
                ));
            }
        }
        Ok(())
    }

    /// The computational grid; `"auto"` sizes it so that the outer boundary
    /// is never reached.
    pub fn grid(&self) -> Result<RadialGrid, ConfigError> {
        let support = self.data.support_estimate();
        let t = self.solver.t_final;
        let n = self.grid.n;
        let r_max = match self.grid.r_max {
            DomainRadius::Auto => auto_r_max(support, t, n),
            DomainRadius::Fixed(r) => {
                let required = required_domain_radius(support, t, r / n as f64);
                if !(r >= required) {
                    return Err(bad(
                        "grid.r_max",
                        format!("{r} is too small for support {support} and t_final {t}: need {required}"),
                    ));
                }
                r
            }
        };
        RadialGrid::new(self.dimension, r_max, n).map_err(|e| bad("grid", e))
    }

    /// Euclidean initial state on `grid` (`ℍ³` data is mapped by `𝐓`).
    pub fn initial_state(&self, grid: &RadialGrid) -> critwave_core::Result<WaveState> {
        match &self.data {
            DataSpec::Euclidean(f) => f.build(grid),
            DataSpec::Hyperbolic { h3_family } => {
                let (v0, v1) = h3_family.build(grid)?;
                WaveState::new(t_forward(&v0), t_forward(&v1), 0.0)
            }
        }
    }

    pub fn hyperbolic_data(&self, grid: &RadialGrid) -> Option<critwave_core::Result<(H3RadialField, H3RadialField)>> {
        match &self.data {
            DataSpec::Hyperbolic { h3_family } => Some(h3_family.build(grid)),
            DataSpec::Euclidean(_) => None,
        }
    }

    /// Output directory: `$CRITWAVE_OUT`, then `flag`, then the config, then
    /// the default.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_output(flag, self.output.as_deref())
    }
}

pub fn resolve_output(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    flag.or(configured).map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "dimension": 3,
        "grid": {"r_max": "auto", "n": 1024},
        "coefficient": {"family": "sinh_power", "sigma": 2},
        "sign": 1,
        "data": {"kind": "scaled_ground_state", "a": 0.5, "lambda": 0.25},
        "solver": {"cfl": 0.5, "t_final": 2.0}
    }"#;

    #[test]
    fn parses_and_sizes_the_domain() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.schema, 1);
        assert_eq!(cfg.sign(), Sign::Focusing);
        let g = cfg.grid().unwrap();
        assert!(g.r_max() >= 16.0 + 2.0 + 2.0 * g.dr());
        assert!(cfg.diagnostics.refine);
    }

    #[test]
    fn round_trips() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_fields() {
        let cases = [
            (BASE.replace("\"dimension\": 3", "\"dimension\": 6"), "dimension"),
            (BASE.replace("\"cfl\": 0.5", "\"cfl\": 2.0"), "solver"),
            (BASE.replace("\"auto\"", "10.0"), "grid.r_max"),
            (BASE.replace("\"sign\": 1,", ""), "sign"),
            (BASE.replace("\"sigma\": 2", "\"sigma\": -1"), "coefficient"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::from_json(&text).unwrap_err();
            let cfg_err = err.downcast_ref::<ConfigError>().expect("config error");
            assert_eq!(cfg_err.field, field, "{err}");
        }
        assert!(ExperimentConfig::from_json(&BASE.replace("\"n\": 1024", "\"n\": 1024, \"m\": 2")).is_err());
    }

    #[test]
    fn hyperbolic_defaults() {
        let text = r#"{
            "dimension": 3,
            "grid": {"n": 512},
            "data": {"h3_family": {"kind": "pulled_back_ground_state", "a": 0.5}},
            "solver": {"cfl": 0.5, "t_final": 1.0}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(cfg.is_hyperbolic());
        assert_eq!(cfg.coefficient(), transformed_coefficient());
        let bad_sign = text.replace("\"grid\"", "\"sign\": -1, \"grid\"");
        assert!(ExperimentConfig::from_json(&bad_sign).is_err());
    }

    #[test]
    fn amplitude_override() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        let DataSpec::Euclidean(DataFamily::ScaledGroundState { a, lambda, .. }) = cfg.data.with_amplitude(1.5).unwrap() else {
            panic!("family changed");
        };
        assert_eq!((a, lambda), (1.5, 0.25));
    }
}
