//! Threshold predictions for scattering versus blow-up, and their comparison
//! with what a run actually did.
//!
//! Every comparison against a threshold carries a tolerance of three times
//! the estimated quadrature error; a datum inside that band is never
//! classified.

use serde::{Deserialize, Serialize};

use crate::coefficients::{certification_grid, check_defocusing_condition, check_focusing_condition, CoefficientSpec};
use crate::error::{invalid, Error, Result};
use crate::evolution::{Outcome, OutcomeKind, Sign, WaveState};
use crate::functionals::energy;
use crate::grid::{sobolev_exponent, sphere_area, RadialField, RadialGrid};
use crate::ground_state::GroundStateConstants;

/// Tolerance band, in units of the estimated quadrature error.
pub const MARGIN_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Scatter,
    BlowUp,
    Indeterminate,
}

/// Which decision procedure produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Energy gate below `E₁(W,0)`, then the sign of `‖∇W‖ - ‖∇u₀‖`.
    FocusingThreshold,
    /// Global scattering whenever the defocusing condition holds.
    DefocusingCondition,
    /// The focusing threshold with constant coefficient `c`, thresholds
    /// rescaled by `c^{-(d-2)/2}` and `c^{-(d-2)/4}`.
    ConstantCoefficient,
    /// The focusing threshold evaluated on `ℍ³` in the `H^{0,1}` norm.
    HyperbolicThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: Regime,
    pub rule: Rule,
    pub energy: f64,
    pub grad_norm: f64,
    pub energy_threshold: Option<f64>,
    pub grad_threshold: Option<f64>,
    /// `energy_threshold - energy`.
    pub energy_gap: Option<f64>,
    /// `grad_threshold - grad_norm`; negative on the blow-up side.
    pub norm_gap: Option<f64>,
    pub energy_tol: f64,
    pub norm_tol: f64,
    pub reason: String,
}

impl Prediction {
    /// Whether a definite verdict is backed by margins outside the tolerance
    /// band in the direction the verdict needs.
    pub fn margins_consistent(&self) -> bool {
        match (self.verdict, self.rule) {
            (Regime::Indeterminate, _) | (_, Rule::DefocusingCondition) => true,
            (v, _) => {
                let (Some(e), Some(g)) = (self.energy_gap, self.norm_gap) else {
                    return false;
                };
                e > self.energy_tol
                    && match v {
                        Regime::Scatter => g > self.norm_tol,
                        _ => -g > self.norm_tol,
                    }
            }
        }
    }
}

/// Energy and gradient norm of a datum with error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Measurement {
    pub energy: f64,
    pub energy_err: f64,
    pub grad_norm: f64,
    pub grad_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Thresholds {
    pub energy: f64,
    pub grad_norm: f64,
    /// Uncertainty of the thresholds themselves.
    pub err: f64,
}

impl Thresholds {
    pub(crate) fn ground(g: &GroundStateConstants, scale_energy: f64, scale_norm: f64) -> Self {
        Self {
            energy: scale_energy * g.energy_e1,
            grad_norm: scale_norm * g.grad_norm(),
            err: scale_energy * g.truncation_error_bound,
        }
    }
}

pub(crate) fn decide(m: Measurement, thr: Thresholds, rule: Rule) -> Prediction {
    let energy_tol = MARGIN_FACTOR * (m.energy_err + thr.err);
    let norm_tol = MARGIN_FACTOR * (m.grad_err + thr.err);
    let energy_gap = thr.energy - m.energy;
    let norm_gap = thr.grad_norm - m.grad_norm;
    let (verdict, reason) = if !(energy_gap > energy_tol) {
        (Regime::Indeterminate, "energy not below the threshold by the tolerance")
    } else if norm_gap > norm_tol {
        (Regime::Scatter, "energy gate passed, gradient norm below the ground state")
    } else if -norm_gap > norm_tol {
        (Regime::BlowUp, "energy gate passed, gradient norm above the ground state")
    } else {
        (Regime::Indeterminate, "gradient norm inside the tolerance band")
    };
    Prediction {
        verdict,
        rule,
        energy: m.energy,
        grad_norm: m.grad_norm,
        energy_threshold: Some(thr.energy),
        grad_threshold: Some(thr.grad_norm),
        energy_gap: Some(energy_gap),
        norm_gap: Some(norm_gap),
        energy_tol,
        norm_tol,
        reason: reason.to_owned(),
    }
}

/// Every other node of `state`, on a grid with half the cells. An odd cell
/// count drops the last node.
pub(crate) fn coarsen(state: &WaveState) -> Result<WaveState> {
    let g = state.grid();
    let m = g.cells() / 2;
    let coarse = RadialGrid::new(g.dim(), g.r(2 * m), m)?;
    let pick = |f: &RadialField| RadialField::new(coarse.clone(), f.values().iter().step_by(2).take(m + 1).copied().collect());
    WaveState::new(pick(&state.u)?, pick(&state.u_t)?, state.t)
}

/// Contribution of the smallest `Ḣ¹` extension of `u` past `r_max`, namely
/// `u(R) (R/r)^{d-2}`: its squared gradient norm and an upper bound for its
/// potential energy with `φ ≤ phi_max`.
fn exterior_tail(state: &WaveState, phi_max: f64) -> (f64, f64) {
    let g = state.grid();
    let d = g.dim() as f64;
    let big_r = g.r_max();
    let u_r = state.u.values()[g.cells()].abs();
    if u_r == 0.0 {
        return (0.0, 0.0);
    }
    let omega = sphere_area(g.dim());
    let grad_sq = omega * (d - 2.0) * u_r * u_r * big_r.powf(d - 2.0);
    let s = sobolev_exponent(g.dim());
    // ∫_R^∞ r^{d-1} (R/r)^{(d-2)2*} dr = R^d / d
    let potential = phi_max * omega * u_r.powf(s) * big_r.powf(d) / (d * s);
    (grad_sq, potential)
}

fn measure_once(state: &WaveState, spec: &CoefficientSpec) -> (f64, f64, f64) {
    let e = energy(state, spec, Sign::Focusing);
    let phi_max = spec.value(state.grid().r_max()).max(1.0);
    let (tail_grad, tail_pot) = exterior_tail(state, phi_max);
    let grad_sq = 2.0 * e.gradient + tail_grad;
    (e.total + 0.5 * tail_grad, grad_sq.sqrt(), tail_pot)
}

/// Focusing energy `E_φ` and `‖∇u₀‖`, each with an error estimate from the
/// difference against the same quadrature on every other node (second
/// order, so the difference is three times the fine-grid error).
pub(crate) fn measure(state: &WaveState, spec: &CoefficientSpec) -> Result<Measurement> {
    let (e, g, tail) = measure_once(state, spec);
    let (ec, gc, _) = measure_once(&coarsen(state)?, spec);
    let m = Measurement {
        energy: e,
        energy_err: (e - ec).abs() / 3.0 + tail,
        grad_norm: g,
        grad_err: (g - gc).abs() / 3.0,
    };
    if ![m.energy, m.energy_err, m.grad_norm, m.grad_err].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("prediction inputs"));
    }
    Ok(m)
}

fn require_focusing_condition(spec: &CoefficientSpec, d: usize) -> Result<()> {
    let report = check_focusing_condition(spec, &certification_grid(d)?);
    if report.verdict.passed() {
        Ok(())
    } else {
        Err(Error::HypothesisNotSatisfied(format!(
            "focusing condition fails for {} (min {:.3e} at r = {})",
            report.coefficient, report.min_value, report.argmin_r
        )))
    }
}

/// Focusing threshold prediction for `u_tt - Δu = φ|u|^{p_c-1}u`.
pub fn predict_focusing(data: &WaveState, spec: &CoefficientSpec, ground: &GroundStateConstants) -> Result<Prediction> {
    let d = data.grid().dim();
    check_ground(ground, d)?;
    spec.validate()?;
    require_focusing_condition(spec, d)?;
    let m = measure(data, spec)?;
    Ok(decide(m, Thresholds::ground(ground, 1.0, 1.0), Rule::FocusingThreshold))
}

/// Defocusing prediction: scattering for every datum when the defocusing
/// condition holds, nothing otherwise.
pub fn predict_defocusing(data: &WaveState, spec: &CoefficientSpec) -> Result<Prediction> {
    spec.validate()?;
    let d = data.grid().dim();
    let report = check_defocusing_condition(spec, &certification_grid(d)?);
    let e = energy(data, spec, Sign::Defocusing);
    let (verdict, reason) = if report.verdict.passed() {
        (Regime::Scatter, "defocusing condition holds".to_owned())
    } else {
        (
            Regime::Indeterminate,
            format!("defocusing condition fails (min {:.3e} at r = {})", report.min_value, report.argmin_r),
        )
    };
    Ok(Prediction {
        verdict,
        rule: Rule::DefocusingCondition,
        energy: e.total,
        grad_norm: (2.0 * e.gradient).sqrt(),
        energy_threshold: None,
        grad_threshold: None,
        energy_gap: None,
        norm_gap: None,
        energy_tol: 0.0,
        norm_tol: 0.0,
        reason,
    })
}

/// Threshold prediction for the constant coefficient `c ∈ (0, 1]`.
pub fn predict_constant_c(data: &WaveState, c: f64, ground: &GroundStateConstants) -> Result<Prediction> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(invalid("c", format!("need 0 < c <= 1, got {c}")));
    }
    let d = data.grid().dim();
    check_ground(ground, d)?;
    let k = d as f64 - 2.0;
    let thr = Thresholds::ground(ground, c.powf(-k / 2.0), c.powf(-k / 4.0));
    let m = measure(data, &CoefficientSpec::constant(c))?;
    Ok(decide(m, thr, Rule::ConstantCoefficient))
}

fn check_ground(ground: &GroundStateConstants, d: usize) -> Result<()> {
    if ground.d != d {
        return Err(invalid("ground", format!("constants for d = {}, data in d = {d}", ground.d)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agreement {
    Consistent,
    Inconsistent,
    Untested,
}

/// A prediction next to an outcome. Inconsistent rows keep both in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub prediction: Regime,
    pub outcome: OutcomeKind,
    pub verdict: Agreement,
    pub detail: Option<Box<(Prediction, Outcome)>>,
}

/// A blow-up outcome counts only once it is confirmed at two resolutions;
/// an indeterminate prediction or undecided run is untested.
pub fn compare(prediction: &Prediction, outcome: &Outcome) -> Comparison {
    let blew_up = outcome.confirmed_blowup();
    let verdict = match (prediction.verdict, outcome.kind) {
        (Regime::Indeterminate, _) | (_, OutcomeKind::Undecided) => Agreement::Untested,
        (_, OutcomeKind::BlewUp) if !blew_up => Agreement::Untested,
        (Regime::Scatter, OutcomeKind::Dispersed) | (Regime::BlowUp, OutcomeKind::BlewUp) => Agreement::Consistent,
        _ => Agreement::Inconsistent,
    };
    Comparison {
        prediction: prediction.verdict,
        outcome: outcome.kind,
        verdict,
        detail: (verdict == Agreement::Inconsistent).then(|| Box::new((prediction.clone(), outcome.clone()))),
    }
}
