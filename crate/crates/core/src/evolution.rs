//! Radial time stepping for `u_tt - Δu = ζ φ |u|^{p_c-1} u`.
//!
//! Both discretizations are Hamiltonian systems `M q̈ = -∇H(q)` with a
//! diagonal mass matrix, integrated by velocity Verlet (kick-drift-kick):
//!
//! - `d = 3` evolves `w = r u`, for which the radial wave operator becomes
//!   `∂_r²` with `w(0) = 0`; the nonlinearity is `ζ φ w⁵ / r⁴`.
//! - `d = 4, 5` use a finite-volume radial Laplacian on cells centred at the
//!   nodes, with face areas `|S^{d-1}| r_{i±1/2}^{d-1}` and a half cell at the
//!   origin, which reduces to `2d (u_1 - u_0)/dr²` there.
//!
//! The outer node is held at zero; [`required_domain_radius`] makes that
//! boundary unreachable within the run.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::{critical_power, lp_norm, sobolev_exponent, sphere_area, RadialField, RadialGrid};
use crate::ground_state::GroundStateConstants;

pub const CFL_CEILING: f64 = 0.9;
pub const SUP_CAP_DEFAULT: f64 = 1e6;
pub const H_CAP_FACTOR_DEFAULT: f64 = 10.0;
/// Blow-up times at `n` and `2n` must agree to this relative tolerance.
pub const REFINEMENT_TOL: f64 = 0.05;
/// Dispersal proxy: final `∫φ|u|^{2*} / |E|` at most this.
pub const DISPERSED_POTENTIAL_FRACTION: f64 = 1e-3;
/// Dispersal proxy: the sup norm must not grow over this final share of rows.
pub const DISPERSED_TAIL_SHARE: f64 = 0.2;

/// Largest stable `dt/dr` of the semi-discrete linear operator.
///
/// For `d = 3` the reduced operator is the 1-D second difference (limit 1).
/// For `d = 4, 5` the largest eigenvalue of the finite-volume Laplacian is
/// `8.22/dr²` and `10.13/dr²` respectively, giving `0.697` and `0.628`; the
/// values below keep a small margin.
pub fn stability_limit(d: usize) -> f64 {
    match d {
        3 => 1.0,
        4 => 0.69,
        _ => 0.62,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: RadialField,
    pub u_t: RadialField,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: RadialField, u_t: RadialField, t: f64) -> Result<Self> {
        if u.grid() != u_t.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, u_t, t })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            u: RadialField::zeros(grid),
            u_t: RadialField::zeros(grid),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.u_t.is_finite()
    }

    /// Time-reversed state: same position, negated velocity.
    pub fn reversed(&self) -> Self {
        Self {
            u: self.u.clone(),
            u_t: self.u_t.scaled(-1.0),
            t: self.t,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.scaled(c),
            u_t: self.u_t.scaled(c),
            t: self.t,
        }
    }
}

/// Sign of the nonlinearity: `+1` focusing, `-1` defocusing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Focusing,
    Defocusing,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Focusing => 1.0,
            Sign::Defocusing => -1.0,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Focusing => 1,
            Sign::Defocusing => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Focusing),
            -1 => Ok(Sign::Defocusing),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `dt/dr`; the actual step is shortened so that it divides `t_final`.
    pub cfl: f64,
    pub t_final: f64,
    pub sign: Sign,
    pub coefficient: CoefficientSpec,
    #[serde(default = "default_sup_cap")]
    pub blowup_sup_cap: f64,
    /// Cap on `‖(u, u_t)‖_{Ḣ¹×L²}` as a multiple of `‖∇W‖`.
    #[serde(default = "default_h_cap")]
    pub blowup_h_cap: f64,
    /// Time between diagnostic snapshots.
    #[serde(default = "default_interval")]
    pub diagnostic_interval: f64,
}

fn default_sup_cap() -> f64 {
    SUP_CAP_DEFAULT
}

fn default_h_cap() -> f64 {
    H_CAP_FACTOR_DEFAULT
}

fn default_interval() -> f64 {
    0.1
}

impl SolverConfig {
    pub fn new(cfl: f64, t_final: f64, sign: Sign, coefficient: CoefficientSpec) -> Self {
        Self {
            cfl,
            t_final,
            sign,
            coefficient,
            blowup_sup_cap: SUP_CAP_DEFAULT,
            blowup_h_cap: H_CAP_FACTOR_DEFAULT,
            diagnostic_interval: default_interval(),
        }
    }

    pub fn with_interval(mut self, interval: f64) -> Self {
        self.diagnostic_interval = interval;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.validate_with_ceiling(d, CFL_CEILING)
    }

    fn validate_with_ceiling(&self, d: usize, ceiling: f64) -> Result<()> {
        let limit = ceiling.min(stability_limit(d));
        if !(self.cfl > 0.0) {
            return Err(invalid("cfl", format!("need cfl > 0, got {}", self.cfl)));
        }
        if self.cfl > limit {
            return Err(Error::CflViolation {
                cfl: self.cfl,
                limit,
                d,
            });
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("t_final", format!("need t_final >= 0, got {}", self.t_final)));
        }
        if !(self.blowup_sup_cap > 0.0) {
            return Err(invalid("blowup_sup_cap", "must be positive"));
        }
        if !(self.blowup_h_cap > 0.0) {
            return Err(invalid("blowup_h_cap", "must be positive"));
        }
        if !(self.diagnostic_interval > 0.0) {
            return Err(invalid("diagnostic_interval", "must be positive"));
        }
        self.coefficient.validate()
    }

    /// Step count and step length covering `[0, t_final]` for grid spacing `dr`.
    pub fn steps(&self, dr: f64) -> (usize, f64) {
        if self.t_final == 0.0 {
            return (0, 0.0);
        }
        let steps = (self.t_final / (self.cfl * dr) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }
}

/// `support + t_final + 2 dr`.
pub fn required_domain_radius(support_radius: f64, t_final: f64, dr: f64) -> f64 {
    support_radius + t_final + 2.0 * dr
}

/// Values below this (relative to `max(1, sup)`) count as outside the support.
pub const SUPPORT_TOL: f64 = 1e-14;

/// Largest radius where `u` or `u_t` is non-negligible.
pub fn support_radius(state: &WaveState) -> f64 {
    let scale = state.u.sup_norm().max(state.u_t.sup_norm()).max(1.0);
    let tol = SUPPORT_TOL * scale;
    state.u.support_radius(tol).max(state.u_t.support_radius(tol))
}

/// Multiply `(u, u_t)` by `c^{(d-2)/4}`, which maps solutions of
/// `u_tt - Δu = c|u|^{p_c-1}u` to solutions with unit coefficient.
pub fn rescale_constant_coefficient(state: &WaveState, c: f64) -> Result<WaveState> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", format!("need c > 0, got {c}")));
    }
    let d = state.grid().dim() as f64;
    Ok(state.scaled(c.powf((d - 2.0) / 4.0)))
}

/// Pieces of the discrete Hamiltonian; `potential` is `∫φ|u|^{2*}/2*`
/// without the sign.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HamiltonianParts {
    pub kinetic: f64,
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
}

impl HamiltonianParts {
    /// `‖(u, u_t)‖_{Ḣ¹×L²}` from the quadratic parts.
    pub fn h_norm(&self) -> f64 {
        (2.0 * (self.kinetic + self.gradient)).max(0.0).sqrt()
    }
}

enum Scheme {
    /// `d = 3`, unknown `w = r u`.
    Reduced { inv_r: Vec<f64> },
    /// `d = 4, 5`, cell volumes and face coefficients.
    Volume {
        vol: Vec<f64>,
        face: Vec<f64>,
        plus: Vec<f64>,
        minus: Vec<f64>,
    },
}

/// Semi-discrete system plus Verlet state. Node `n` is a fixed zero.
struct Stepper {
    grid: RadialGrid,
    p: f64,
    scheme: Scheme,
    /// `ζ φ_i` (and `/ r_i^4` for the reduced scheme); empty when linear.
    nl: Vec<f64>,
    sign: f64,
    q: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

impl Stepper {
    fn new(state: &WaveState, sign: Sign, spec: Option<&CoefficientSpec>) -> Self {
        let grid = state.grid().clone();
        let d = grid.dim();
        let n = grid.cells();
        let dr = grid.dr();
        let area = sphere_area(d);
        let z = sign.value();
        let (scheme, q, v, nl) = if d == 3 {
            let inv_r: Vec<f64> = (0..=n)
                .map(|i| if i == 0 { 0.0 } else { 1.0 / grid.r(i) })
                .collect();
            let q: Vec<f64> = (0..=n).map(|i| grid.r(i) * state.u.values()[i]).collect();
            let v: Vec<f64> = (0..=n).map(|i| grid.r(i) * state.u_t.values()[i]).collect();
            let nl = spec.map_or_else(Vec::new, |s| {
                (0..=n)
                    .map(|i| z * s.value(grid.r(i)) * inv_r[i].powi(4))
                    .collect()
            });
            (Scheme::Reduced { inv_r }, q, v, nl)
        } else {
            let k = d as i32 - 1;
            let vol: Vec<f64> = (0..=n)
                .map(|i| {
                    if i == 0 {
                        area * (dr / 2.0).powi(d as i32) / d as f64
                    } else {
                        area * grid.r(i).powi(k) * dr
                    }
                })
                .collect();
            // face[i] sits at r_{i+1/2}
            let face: Vec<f64> = (0..n)
                .map(|i| area * ((i as f64 + 0.5) * dr).powi(k))
                .collect();
            let plus: Vec<f64> = (0..n).map(|i| face[i] / (vol[i] * dr)).collect();
            let minus: Vec<f64> = (0..n)
                .map(|i| if i == 0 { 0.0 } else { face[i - 1] / (vol[i] * dr) })
                .collect();
            let q = state.u.values().to_vec();
            let v = state.u_t.values().to_vec();
            let nl = spec.map_or_else(Vec::new, |s| {
                (0..=n).map(|i| z * s.value(grid.r(i))).collect()
            });
            (
                Scheme::Volume {
                    vol,
                    face,
                    plus,
                    minus,
                },
                q,
                v,
                nl,
            )
        };
        let mut s = Self {
            p: critical_power(d),
            grid,
            scheme,
            nl,
            sign: z,
            q,
            v,
            a: vec![0.0; n + 1],
        };
        s.q[n] = 0.0;
        s.v[n] = 0.0;
        if let Scheme::Reduced { .. } = s.scheme {
            s.q[0] = 0.0;
            s.v[0] = 0.0;
        }
        s.accelerate();
        s
    }

    fn accelerate(&mut self) {
        let n = self.grid.cells();
        let dr = self.grid.dr();
        let q = &self.q;
        let a = &mut self.a;
        match &self.scheme {
            Scheme::Reduced { .. } => {
                let inv_h2 = 1.0 / (dr * dr);
                a[0] = 0.0;
                for i in 1..n {
                    a[i] = (q[i + 1] - 2.0 * q[i] + q[i - 1]) * inv_h2;
                }
                if !self.nl.is_empty() {
                    for i in 1..n {
                        let w = q[i];
                        let w2 = w * w;
                        a[i] += self.nl[i] * w2 * w2 * w;
                    }
                }
            }
            Scheme::Volume { plus, minus, .. } => {
                a[0] = plus[0] * (q[1] - q[0]);
                for i in 1..n {
                    a[i] = plus[i] * (q[i + 1] - q[i]) - minus[i] * (q[i] - q[i - 1]);
                }
                if !self.nl.is_empty() {
                    let d = self.grid.dim();
                    for i in 0..n {
                        a[i] += self.nl[i] * focusing_power(d, q[i]);
                    }
                }
            }
        }
        a[n] = 0.0;
    }

    fn step(&mut self, dt: f64) {
        let h = 0.5 * dt;
        for (v, a) in self.v.iter_mut().zip(&self.a) {
            *v += h * a;
        }
        for (q, v) in self.q.iter_mut().zip(&self.v) {
            *q += dt * v;
        }
        self.accelerate();
        for (v, a) in self.v.iter_mut().zip(&self.a) {
            *v += h * a;
        }
    }

    fn hamiltonian(&self) -> HamiltonianParts {
        let n = self.grid.cells();
        let dr = self.grid.dr();
        let (q, v) = (&self.q, &self.v);
        let (mut kin, mut grad, mut pot) = (0.0, 0.0, 0.0);
        match &self.scheme {
            Scheme::Reduced { .. } => {
                let area = 4.0 * std::f64::consts::PI;
                for i in 1..n {
                    kin += v[i] * v[i];
                }
                for i in 0..n {
                    let dw = q[i + 1] - q[i];
                    grad += dw * dw;
                }
                if !self.nl.is_empty() {
                    for i in 1..n {
                        let w2 = q[i] * q[i];
                        // φ w⁶ / r⁴, unsigned
                        pot += self.nl[i] * self.sign * w2 * w2 * w2;
                    }
                }
                kin *= area * 0.5 * dr;
                grad *= area * 0.5 / dr;
                pot *= area * dr / 6.0;
            }
            Scheme::Volume { vol, face, .. } => {
                for i in 0..n {
                    kin += vol[i] * v[i] * v[i];
                    let du = q[i + 1] - q[i];
                    grad += face[i] * du * du;
                }
                kin *= 0.5;
                grad *= 0.5 / dr;
                if !self.nl.is_empty() {
                    let e = self.p + 1.0;
                    for i in 0..n {
                        pot += vol[i] * self.nl[i] * self.sign * q[i].abs().powf(e);
                    }
                    pot /= e;
                }
            }
        }
        HamiltonianParts {
            kinetic: kin,
            gradient: grad,
            potential: pot,
            total: kin + grad - self.sign * pot,
        }
    }

    /// `‖(u, u_t)‖_{Ḣ¹×L²}` from the quadratic part of the Hamiltonian.
    fn h_norm(&self) -> f64 {
        let n = self.grid.cells();
        let dr = self.grid.dr();
        let (q, v) = (&self.q, &self.v);
        let (mut kin, mut grad) = (0.0, 0.0);
        match &self.scheme {
            Scheme::Reduced { .. } => {
                for i in 0..n {
                    let dw = q[i + 1] - q[i];
                    kin += v[i] * v[i];
                    grad += dw * dw;
                }
                let area = 4.0 * std::f64::consts::PI;
                kin *= area * dr;
                grad *= area / dr;
            }
            Scheme::Volume { vol, face, .. } => {
                for i in 0..n {
                    let du = q[i + 1] - q[i];
                    kin += vol[i] * v[i] * v[i];
                    grad += face[i] * du * du;
                }
                grad /= dr;
            }
        }
        (kin + grad).max(0.0).sqrt()
    }

    fn sup_u(&self) -> f64 {
        match &self.scheme {
            Scheme::Reduced { inv_r } => {
                let mut m = origin_value(&self.q, self.grid.dr()).abs();
                for (w, ir) in self.q.iter().zip(inv_r).skip(1) {
                    let u = (w * ir).abs();
                    if u > m || u.is_nan() {
                        m = u;
                    }
                }
                m
            }
            Scheme::Volume { .. } => self.q.iter().fold(0.0, |m: f64, x| {
                if x.is_nan() {
                    f64::NAN
                } else {
                    m.max(x.abs())
                }
            }),
        }
    }

    fn state(&self, t: f64) -> WaveState {
        let (u, u_t) = match &self.scheme {
            Scheme::Reduced { inv_r } => {
                let dr = self.grid.dr();
                let unreduce = |w: &[f64]| -> Vec<f64> {
                    let mut out: Vec<f64> = w.iter().zip(inv_r).map(|(w, ir)| w * ir).collect();
                    out[0] = origin_value(w, dr);
                    out
                };
                (unreduce(&self.q), unreduce(&self.v))
            }
            Scheme::Volume { .. } => (self.q.clone(), self.v.clone()),
        };
        WaveState {
            u: RadialField::new(self.grid.clone(), u).expect("length matches grid"),
            u_t: RadialField::new(self.grid.clone(), u_t).expect("length matches grid"),
            t,
        }
    }
}

/// `u(0)` from `w = r u` with `u` even: `w = u_0 r + c r³` gives
/// `u_0 = (8 w_1 - w_2)/(6 dr)`.
fn origin_value(w: &[f64], dr: f64) -> f64 {
    (8.0 * w[1] - w[2]) / (6.0 * dr)
}

/// `|x|^{p-1} x` for the critical power of each dimension.
#[inline]
fn focusing_power(d: usize, x: f64) -> f64 {
    match d {
        3 => {
            let x2 = x * x;
            x2 * x2 * x
        }
        4 => x * x * x,
        _ => {
            let ax = x.abs();
            x * ax * ax.cbrt()
        }
    }
}

/// What the observer sees at each diagnostic time.
pub struct Snapshot<'a> {
    pub state: &'a WaveState,
    pub hamiltonian: HamiltonianParts,
    pub step: usize,
}

pub trait Observer {
    fn observe(&mut self, snap: &Snapshot<'_>);
}

impl Observer for () {
    fn observe(&mut self, _: &Snapshot<'_>) {}
}

impl<F: FnMut(&Snapshot<'_>)> Observer for F {
    fn observe(&mut self, snap: &Snapshot<'_>) {
        self(snap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cap {
    Sup,
    HNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunEnd {
    Completed,
    CapHit { t: f64, cap: Cap },
    NonFinite { t: f64 },
}

/// A single run: how it ended, where it ended, and the per-snapshot
/// sup-norm and Hamiltonian histories.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub end: RunEnd,
    pub final_state: WaveState,
    pub dt: f64,
    pub steps: usize,
    pub sup_history: Vec<(f64, f64)>,
    pub hamiltonian: Vec<(f64, HamiltonianParts)>,
}

impl Evolution {
    /// Largest `|H(t) - H(0)| / |H(0)|` over snapshots (absolute if `H(0) = 0`).
    pub fn hamiltonian_drift(&self) -> f64 {
        let Some((_, h0)) = self.hamiltonian.first() else {
            return 0.0;
        };
        let scale = if h0.total != 0.0 { h0.total.abs() } else { 1.0 };
        self.hamiltonian
            .iter()
            .map(|(_, h)| (h.total - h0.total).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// `∫φ|u|^{2*} / |E|` at the last snapshot; 0 when the energy vanishes.
    pub fn final_potential_fraction(&self) -> f64 {
        let Some((_, h)) = self.hamiltonian.last() else {
            return 0.0;
        };
        if h.total == 0.0 {
            return 0.0;
        }
        let s = sobolev_exponent(self.final_state.grid().dim());
        s * h.potential / h.total.abs()
    }

    /// Sup norm nonincreasing (to relative slack `1e-9`) over the final
    /// share of snapshots.
    pub fn sup_nonincreasing_tail(&self) -> bool {
        let k = self.sup_history.len();
        if k < 2 {
            return true;
        }
        let start = ((1.0 - DISPERSED_TAIL_SHARE) * k as f64).floor() as usize;
        self.sup_history[start.min(k - 1)..]
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9))
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self.end {
            RunEnd::CapHit { t, .. } => Some(t),
            _ => None,
        }
    }

    fn sup_tail(&self) -> Vec<(f64, f64)> {
        let k = self.sup_history.len();
        let start = ((1.0 - DISPERSED_TAIL_SHARE) * k as f64).floor() as usize;
        self.sup_history[start.min(k)..].to_vec()
    }

    /// Outcome of this run alone. A cap hit is reported as `BlewUp` with
    /// `refinement_consistent: None` until confirmed at a second resolution.
    pub fn outcome(&self) -> Outcome {
        let evidence = Evidence {
            potential_fraction: self.final_potential_fraction(),
            sup_tail: self.sup_tail(),
            sup_nonincreasing: self.sup_nonincreasing_tail(),
            refinement_consistent: None,
            non_finite: matches!(self.end, RunEnd::NonFinite { .. }),
            cap: match self.end {
                RunEnd::CapHit { cap, .. } => Some(cap),
                _ => None,
            },
            blowup_times: self.blowup_time().into_iter().collect(),
            heuristic: true,
        };
        let (kind, t_event) = match self.end {
            RunEnd::CapHit { t, .. } => (OutcomeKind::BlewUp, Some(t)),
            RunEnd::NonFinite { t } => (OutcomeKind::Undecided, Some(t)),
            RunEnd::Completed => {
                if evidence.potential_fraction <= DISPERSED_POTENTIAL_FRACTION && evidence.sup_nonincreasing {
                    (OutcomeKind::Dispersed, None)
                } else {
                    (OutcomeKind::Undecided, None)
                }
            }
        };
        Outcome {
            kind,
            t_event,
            evidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Dispersed,
    BlewUp,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub potential_fraction: f64,
    /// `(t, sup|u|)` over the final share of snapshots.
    pub sup_tail: Vec<(f64, f64)>,
    pub sup_nonincreasing: bool,
    pub refinement_consistent: Option<bool>,
    pub non_finite: bool,
    pub cap: Option<Cap>,
    /// Cap-hit times, coarse grid first.
    pub blowup_times: Vec<f64>,
    /// Always true: dispersal and blow-up are numerical proxies.
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub t_event: Option<f64>,
    pub evidence: Evidence,
}

impl Outcome {
    /// A blow-up confirmed at two resolutions.
    pub fn confirmed_blowup(&self) -> bool {
        self.kind == OutcomeKind::BlewUp && self.evidence.refinement_consistent == Some(true)
    }
}

fn check_domain(initial: &WaveState, t_final: f64) -> Result<()> {
    let grid = initial.grid();
    let required = required_domain_radius(support_radius(initial), t_final, grid.dr());
    if grid.r_max() < required * (1.0 - 1e-12) {
        return Err(Error::DomainTooSmall {
            r_max: grid.r_max(),
            required,
        });
    }
    Ok(())
}

/// Nonlinear evolution of `initial` to `config.t_final`, stopping at a cap
/// hit or a non-finite value.
pub fn evolve(initial: &WaveState, config: &SolverConfig, observer: &mut dyn Observer) -> Result<Evolution> {
    let d = initial.grid().dim();
    config.validate(d)?;
    let grad_w = GroundStateConstants::for_dim(d)?.grad_norm();
    run(
        initial,
        config,
        Some(&config.coefficient),
        config.blowup_h_cap * grad_w,
        observer,
    )
}

/// Free wave evolution. For `d = 3` any `cfl <= 1` is allowed; at `cfl = 1`
/// the reduced scheme reproduces d'Alembert's formula on the grid.
pub fn evolve_linear(initial: &WaveState, t_final: f64, cfl: f64) -> Result<WaveState> {
    Ok(evolve_linear_observed(initial, t_final, cfl, &mut ())?.final_state)
}

pub fn evolve_linear_observed(
    initial: &WaveState,
    t_final: f64,
    cfl: f64,
    observer: &mut dyn Observer,
) -> Result<Evolution> {
    let config = linear_config(initial, t_final, cfl)?;
    run(initial, &config, None, f64::INFINITY, observer)
}

fn linear_config(initial: &WaveState, t_final: f64, cfl: f64) -> Result<SolverConfig> {
    let mut config = SolverConfig::new(cfl, t_final, Sign::Focusing, CoefficientSpec::constant(1.0));
    config.blowup_sup_cap = f64::INFINITY;
    config.validate_with_ceiling(initial.grid().dim(), 1.0)?;
    Ok(config)
}

fn run(
    initial: &WaveState,
    config: &SolverConfig,
    spec: Option<&CoefficientSpec>,
    h_cap: f64,
    observer: &mut dyn Observer,
) -> Result<Evolution> {
    check_domain(initial, config.t_final)?;
    run_contained(initial, config, spec, h_cap, observer)
}

/// [`run`] without the domain check, for continuing a run whose whole
/// window was checked up front.
fn run_contained(
    initial: &WaveState,
    config: &SolverConfig,
    spec: Option<&CoefficientSpec>,
    h_cap: f64,
    observer: &mut dyn Observer,
) -> Result<Evolution> {
    if !initial.is_finite() {
        return Err(Error::NonFinite("initial data"));
    }
    let grid = initial.grid();
    let (steps, dt) = config.steps(grid.dr());
    let every = if dt > 0.0 {
        ((config.diagnostic_interval / dt).round() as usize).max(1)
    } else {
        1
    };
    let mut stepper = Stepper::new(initial, config.sign, spec);
    let t0 = initial.t;
    let mut sup_history = Vec::new();
    let mut hamiltonian = Vec::new();
    let mut emit = |stepper: &Stepper, k: usize, observer: &mut dyn Observer| -> WaveState {
        let t = t0 + k as f64 * dt;
        let state = stepper.state(t);
        let h = stepper.hamiltonian();
        sup_history.push((t, state.u.sup_norm()));
        hamiltonian.push((t, h));
        observer.observe(&Snapshot {
            state: &state,
            hamiltonian: h,
            step: k,
        });
        state
    };
    let mut last = emit(&stepper, 0, observer);
    let mut end = RunEnd::Completed;
    for k in 1..=steps {
        stepper.step(dt);
        let t = t0 + k as f64 * dt;
        let sup = stepper.sup_u();
        if !sup.is_finite() {
            end = RunEnd::NonFinite { t };
            break;
        }
        let cap = if sup >= config.blowup_sup_cap {
            Some(Cap::Sup)
        } else if h_cap.is_finite() && stepper.h_norm() >= h_cap {
            Some(Cap::HNorm)
        } else {
            None
        };
        if let Some(cap) = cap {
            last = emit(&stepper, k, observer);
            end = RunEnd::CapHit { t, cap };
            break;
        }
        if k % every == 0 || k == steps {
            last = emit(&stepper, k, observer);
        }
    }
    let taken = match end {
        RunEnd::Completed => steps,
        RunEnd::CapHit { t, .. } | RunEnd::NonFinite { t } => ((t - t0) / dt).round() as usize,
    };
    Ok(Evolution {
        end,
        final_state: last,
        dt,
        steps: taken,
        sup_history,
        hamiltonian,
    })
}

/// `‖(u, u_t)‖_{Ḣ¹×L²}` for `d = 3` computed on `w = r u` with centred
/// differences and uniform weights. At `cfl = 1` the free scheme transports
/// grid samples exactly and the Verlet velocity is the centred time
/// difference, so this sum is conserved to round-off.
pub fn reduced_energy_norm(state: &WaveState) -> Result<f64> {
    let grid = state.grid();
    if grid.dim() != 3 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let n = grid.cells();
    let dr = grid.dr();
    let w: Vec<f64> = (0..=n).map(|i| grid.r(i) * state.u.values()[i]).collect();
    let v: Vec<f64> = (0..=n).map(|i| grid.r(i) * state.u_t.values()[i]).collect();
    // w is odd across the origin, so the centred difference there is w_1/dr
    let mut sum = 0.5 * (w[1] / dr).powi(2);
    for i in 1..n {
        let dw = (w[i + 1] - w[i - 1]) / (2.0 * dr);
        sum += dw * dw + v[i] * v[i];
    }
    Ok((4.0 * std::f64::consts::PI * dr * sum).sqrt())
}

/// Result of running the same data at `n` and `2n` cells.
#[derive(Debug, Clone)]
pub struct RefinedRun {
    pub coarse: Evolution,
    pub fine: Evolution,
    pub outcome: Outcome,
}

/// Runs `build` on `grid` and on the refined grid. A blow-up counts only if
/// both runs hit a cap within [`REFINEMENT_TOL`] of each other; dispersal
/// only if both runs disperse. The observer sees the coarse run.
pub fn evolve_with_refinement(
    build: impl Fn(&RadialGrid) -> Result<WaveState>,
    grid: &RadialGrid,
    config: &SolverConfig,
    observer: &mut dyn Observer,
) -> Result<RefinedRun> {
    let coarse = evolve(&build(grid)?, config, observer)?;
    let fine = evolve(&build(&grid.refined())?, config, &mut ())?;
    let outcome = refined_outcome(&coarse, &fine);
    Ok(RefinedRun {
        coarse,
        fine,
        outcome,
    })
}

/// Combines a run and its refinement into one outcome, reported on the
/// coarse run's evidence.
pub fn refined_outcome(coarse: &Evolution, fine: &Evolution) -> Outcome {
    let a = coarse.outcome();
    let b = fine.outcome();
    let mut outcome = a.clone();
    outcome.evidence.blowup_times = coarse.blowup_time().into_iter().chain(fine.blowup_time()).collect();
    match (a.kind, b.kind) {
        (OutcomeKind::BlewUp, OutcomeKind::BlewUp) => {
            let (t1, t2) = (a.t_event.unwrap_or(0.0), b.t_event.unwrap_or(0.0));
            let ok = (t1 - t2).abs() <= REFINEMENT_TOL * t2.max(t1);
            outcome.evidence.refinement_consistent = Some(ok);
            if !ok {
                outcome.kind = OutcomeKind::Undecided;
            }
        }
        (OutcomeKind::Dispersed, OutcomeKind::Dispersed) => {
            outcome.evidence.refinement_consistent = Some(true);
        }
        (OutcomeKind::Undecided, OutcomeKind::Undecided) => {}
        _ => {
            outcome.evidence.refinement_consistent = Some(false);
            outcome.kind = OutcomeKind::Undecided;
        }
    }
    outcome
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `(t, ‖u‖_{L^{2*}}, ‖u‖_{L^∞})`
    pub samples: Vec<(f64, f64, f64)>,
    pub l2star_slope: f64,
    pub linf_slope: f64,
    /// Start of the fitting window (last decade of `t`).
    pub fit_from: f64,
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in points {
        let dx = x.ln() - mx;
        sxy += dx * (y.ln() - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Free evolution sampled at increasing `t_samples`, with least-squares
/// log-log slopes of the `L^{2*}` and `L^∞` norms over the last decade.
pub fn free_decay_test(initial: &WaveState, t_samples: &[f64], cfl: f64) -> Result<DecayFit> {
    if t_samples.len() < 3 {
        return Err(Error::TooFewSamples {
            got: t_samples.len(),
            need: 3,
        });
    }
    if t_samples.windows(2).any(|w| !(w[1] > w[0])) || !(t_samples[0] > initial.t) {
        return Err(invalid("t_samples", "must increase strictly and follow the initial time"));
    }
    if initial.u.sup_norm() == 0.0 && initial.u_t.sup_norm() == 0.0 {
        return Err(Error::DegenerateData("zero initial data has no decay rate".into()));
    }
    let t_end = *t_samples.last().expect("checked non-empty");
    check_domain(initial, t_end - initial.t)?;
    let p = sobolev_exponent(initial.grid().dim());
    let mut state = initial.clone();
    let mut samples = Vec::with_capacity(t_samples.len());
    // the domain holds the whole window; later segments would otherwise see
    // sub-tolerance dispersive ripples ahead of the front as support
    for &t in t_samples {
        let config = linear_config(&state, t - state.t, cfl)?;
        state = run_contained(&state, &config, None, f64::INFINITY, &mut ())?.final_state;
        state.t = t;
        samples.push((t, lp_norm(&state.u, p)?, state.u.sup_norm()));
    }
    if samples.iter().any(|s| s.1 <= 0.0 || s.2 <= 0.0) {
        return Err(Error::DegenerateData("norm vanished at a sample time".into()));
    }
    let fit_from = t_end / 10.0;
    let window: Vec<_> = samples.iter().filter(|s| s.0 >= fit_from * (1.0 - 1e-12)).collect();
    if window.len() < 3 {
        return Err(Error::TooFewSamples {
            got: window.len(),
            need: 3,
        });
    }
    let l2: Vec<(f64, f64)> = window.iter().map(|s| (s.0, s.1)).collect();
    let li: Vec<(f64, f64)> = window.iter().map(|s| (s.0, s.2)).collect();
    Ok(DecayFit {
        l2star_slope: loglog_slope(&l2),
        linf_slope: loglog_slope(&li),
        samples,
        fit_from,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state;
    use approx::assert_relative_eq;

    fn bump_state(grid: &RadialGrid, center: f64, width: f64) -> WaveState {
        let u = RadialField::from_fn(grid, |r| {
            let x = (r - center) / width;
            if x.abs() < 1.0 {
                (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
            } else {
                0.0
            }
        });
        WaveState::new(u, RadialField::zeros(grid), 0.0).unwrap()
    }

    #[test]
    fn steps_divide_t_final() {
        let c = SolverConfig::new(0.5, 1.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        let (k, dt) = c.steps(0.01);
        assert_eq!(k, 200);
        assert_relative_eq!(dt * k as f64, 1.0, epsilon = 1e-15);
        assert_eq!(c.steps(0.03).0, 67);
    }

    #[test]
    fn cfl_limits() {
        let mut c = SolverConfig::new(0.95, 1.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        assert!(matches!(c.validate(3), Err(Error::CflViolation { .. })));
        c.cfl = 0.8;
        assert!(c.validate(3).is_ok());
        assert!(matches!(c.validate(4), Err(Error::CflViolation { .. })));
        assert!(matches!(c.validate(5), Err(Error::CflViolation { .. })));
        c.cfl = 0.6;
        assert!(c.validate(5).is_ok());
    }

    #[test]
    fn sign_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&Sign::Defocusing).unwrap(), "-1");
        let s: Sign = serde_json::from_str("1").unwrap();
        assert_eq!(s, Sign::Focusing);
        assert!(serde_json::from_str::<Sign>("0").is_err());
    }

    #[test]
    fn domain_radius() {
        assert_relative_eq!(required_domain_radius(5.0, 10.0, 0.01), 15.02);
        assert_relative_eq!(required_domain_radius(0.0, 0.0, 0.01), 0.02);
    }

    #[test]
    fn zero_data_stays_zero() {
        for d in 3..=5 {
            let g = RadialGrid::new(d, 10.0, 256).unwrap();
            let cfg = SolverConfig::new(0.5, 2.0, Sign::Focusing, CoefficientSpec::sinh_power(2.0));
            let ev = evolve(&WaveState::zeros(&g), &cfg, &mut ()).unwrap();
            assert_eq!(ev.final_state.u.sup_norm(), 0.0);
            assert_eq!(ev.outcome().kind, OutcomeKind::Dispersed);
        }
    }

    #[test]
    fn domain_too_small_rejected() {
        let g = RadialGrid::new(3, 10.0, 512).unwrap();
        let s = bump_state(&g, 5.0, 1.0);
        let cfg = SolverConfig::new(0.5, 5.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        assert!(matches!(evolve(&s, &cfg, &mut ()), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn rescale_constant() {
        let g = RadialGrid::new(3, 10.0, 64).unwrap();
        let s = bump_state(&g, 2.0, 1.0);
        assert_eq!(rescale_constant_coefficient(&s, 1.0).unwrap(), s);
        let r = rescale_constant_coefficient(&s, 16.0).unwrap();
        for (a, b) in r.u.values().iter().zip(s.u.values()) {
            assert_relative_eq!(*a, 2.0 * b, max_relative = 1e-15);
        }
        assert!(rescale_constant_coefficient(&s, 0.0).is_err());
    }

    /// Odd extension of `w = r u` makes d'Alembert exact on the grid at `cfl = 1`.
    #[test]
    fn dalembert_exact_at_unit_cfl() {
        let g = RadialGrid::new(3, 20.0, 2000).unwrap();
        let f = |r: f64| (-(r - 8.0) * (r - 8.0)).exp();
        let u0 = RadialField::from_fn(&g, f);
        let s = WaveState::new(u0, RadialField::zeros(&g), 0.0).unwrap();
        let out = evolve_linear(&s, 3.0, 1.0).unwrap();
        let wt = |x: f64| x * f(x.abs()) * 1.0;
        let mut err: f64 = 0.0;
        for i in 1..g.cells() {
            let r = g.r(i);
            let exact = 0.5 * (wt(r + 3.0) + wt(r - 3.0)) / r;
            err = err.max((out.u.values()[i] - exact).abs());
        }
        assert!(err < 1e-12, "sup error {err}");
    }

    #[test]
    fn linear_energy_preserved() {
        for d in 3..=5 {
            let g = RadialGrid::new(d, 20.0, 2000).unwrap();
            let s = bump_state(&g, 5.0, 2.0);
            let ev = evolve_linear_observed(&s, 5.0, 0.5, &mut ()).unwrap();
            assert!(ev.hamiltonian_drift() < 1e-4, "d={d} drift {}", ev.hamiltonian_drift());
        }
    }

    #[test]
    fn unit_cfl_preserves_reduced_norm() {
        let g = RadialGrid::new(3, 20.0, 2000).unwrap();
        let s = bump_state(&g, 8.0, 2.0);
        let n0 = reduced_energy_norm(&s).unwrap();
        let out = evolve_linear(&s, 3.0, 1.0).unwrap();
        let n1 = reduced_energy_norm(&out).unwrap();
        assert_relative_eq!(n0, n1, max_relative = 1e-10);
    }

    #[test]
    fn linear_time_reversal() {
        for d in 3..=5 {
            let g = RadialGrid::new(d, 20.0, 1000).unwrap();
            let s = bump_state(&g, 5.0, 2.0);
            let fwd = evolve_linear(&s, 4.0, 0.5).unwrap();
            let back = evolve_linear(&fwd.reversed(), 4.0, 0.5).unwrap().reversed();
            let err = back
                .u
                .values()
                .iter()
                .zip(s.u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-9, "d={d} err {err}");
        }
    }

    #[test]
    fn support_grows_at_unit_speed() {
        let g = RadialGrid::new(3, 20.0, 2000).unwrap();
        let s = bump_state(&g, 3.0, 2.0);
        let r0 = support_radius(&s);
        assert!(r0 > 4.9 && r0 < 5.0, "{r0}");
        let out = evolve_linear(&s, 10.0, 1.0).unwrap();
        assert!(support_radius(&out) <= r0 + 10.0 + 2.0 * g.dr());
    }

    #[test]
    fn ground_state_is_nearly_stationary() {
        // W cut off far from the origin; the cutoff region cannot reach
        // r < 8 - t within the run.
        let g = RadialGrid::new(3, 30.0, 3000).unwrap();
        let u = RadialField::from_fn(&g, |r| {
            ground_state::value(3, r) * crate::functionals::cutoff_value(r, 8.0)
        });
        let s = WaveState::new(u.clone(), RadialField::zeros(&g), 0.0).unwrap();
        let cfg = SolverConfig::new(0.5, 2.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        let ev = evolve(&s, &cfg, &mut ()).unwrap();
        let inner = g.index_at_or_above(5.0);
        let drift = (0..inner)
            .map(|i| (ev.final_state.u.values()[i] - u.values()[i]).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-3, "drift {drift}");
    }

    #[test]
    fn nonlinear_rescaling_equivalence() {
        let g = RadialGrid::new(3, 30.0, 1500).unwrap();
        let u = RadialField::from_fn(&g, |r| {
            0.3 * ground_state::value(3, r) * crate::functionals::cutoff_value(r, 8.0)
        });
        let s = WaveState::new(u, RadialField::zeros(&g), 0.0).unwrap();
        let c = 0.5;
        let cfg_c = SolverConfig::new(0.5, 1.0, Sign::Focusing, CoefficientSpec::constant(c));
        let cfg_1 = SolverConfig::new(0.5, 1.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        let a = evolve(&s, &cfg_c, &mut ()).unwrap().final_state;
        let a = rescale_constant_coefficient(&a, c).unwrap();
        let b = evolve(&rescale_constant_coefficient(&s, c).unwrap(), &cfg_1, &mut ())
            .unwrap()
            .final_state;
        let err = a
            .u
            .values()
            .iter()
            .zip(b.u.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn decay_test_rejects_bad_input() {
        let g = RadialGrid::new(3, 30.0, 300).unwrap();
        let z = WaveState::zeros(&g);
        assert!(matches!(
            free_decay_test(&z, &[1.0, 2.0, 3.0], 1.0),
            Err(Error::DegenerateData(_))
        ));
        let s = bump_state(&g, 3.0, 1.0);
        assert!(matches!(
            free_decay_test(&s, &[1.0, 2.0], 1.0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, 3.0 * (k as f64).powf(-0.7))).collect();
        assert_relative_eq!(loglog_slope(&pts), -0.7, epsilon = 1e-12);
    }
}
