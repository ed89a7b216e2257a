//! Integral diagnostics: energies, energy trapping, space-time norms, the
//! Morawetz integral, the localized virial functionals and their predicted
//! time derivatives, and the exterior tail functional.

use serde::{Deserialize, Serialize};

use crate::coefficients::{check_defocusing_condition, morawetz_weight, CoefficientSpec};
use crate::error::{invalid, Error, Result};
use crate::evolution::{evolve, Evolution, HamiltonianParts, Observer, Outcome, Sign, Snapshot, SolverConfig, WaveState};
use crate::grid::{critical_power, radial_derivative, sobolev_exponent, sphere_area, RadialField, RadialGrid};
use crate::ground_state::GroundStateConstants;

/// Quintic smoothstep `x³(10 - 15x + 6x²)`: `C²`, flat at both ends.
fn smoothstep(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0)
    } else {
        let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
        let ds = 30.0 * x * x * (1.0 - x) * (1.0 - x);
        (s, ds)
    }
}

/// `φ_R(r)`: 1 on `r <= R`, 0 on `r >= 2R`.
pub fn cutoff_value(r: f64, radius: f64) -> f64 {
    1.0 - smoothstep((r - radius) / radius).0
}

pub fn cutoff_derivative(r: f64, radius: f64) -> f64 {
    -smoothstep((r - radius) / radius).1 / radius
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffField {
    pub radius: f64,
    pub value: RadialField,
    pub d_dr: RadialField,
}

impl CutoffField {
    pub fn new(grid: &RadialGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("R", format!("cutoff radius must be positive, got {radius}")));
        }
        Ok(Self {
            radius,
            value: RadialField::from_fn(grid, |r| cutoff_value(r, radius)),
            d_dr: RadialField::from_fn(grid, |r| cutoff_derivative(r, radius)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energy {
    pub total: f64,
    pub kinetic: f64,
    pub gradient: f64,
    /// `∫φ|u|^{2*} / 2*`, unsigned.
    pub potential: f64,
}

/// `∫ ½|∇u|² + ½|u_t|² - (ζ/2*) φ |u|^{2*}` by Simpson quadrature.
pub fn energy(state: &WaveState, spec: &CoefficientSpec, sign: Sign) -> Energy {
    let grid = state.grid();
    let w = grid.measure_weights();
    let s = sobolev_exponent(grid.dim());
    let du = radial_derivative(&state.u);
    let (mut k, mut g, mut p) = (0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        let (u, ut, ur) = (state.u.values()[i], state.u_t.values()[i], du.values()[i]);
        k += w[i] * ut * ut;
        g += w[i] * ur * ur;
        if u != 0.0 {
            p += w[i] * spec.value(grid.r(i)) * u.abs().powf(s);
        }
    }
    let (k, g, p) = (0.5 * k, 0.5 * g, p / s);
    Energy {
        total: k + g - sign.value() * p,
        kinetic: k,
        gradient: g,
        potential: p,
    }
}

/// `∫|∇f|²`, `∫|f|^{2*}`, `∫φ|f|^{2*}` and `∫|f_t|²` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pieces {
    grad_sq: f64,
    l2star: f64,
    phi_l2star: f64,
    kinetic_sq: f64,
}

fn pieces(state: &WaveState, spec: &CoefficientSpec) -> Pieces {
    let e = energy(state, spec, Sign::Focusing);
    let grid = state.grid();
    let s = sobolev_exponent(grid.dim());
    let l2star = grid.integrate_values(&state.u.values().iter().map(|u| u.abs().powf(s)).collect::<Vec<_>>());
    Pieces {
        grad_sq: 2.0 * e.gradient,
        l2star,
        phi_l2star: s * e.potential,
        kinetic_sq: 2.0 * e.kinetic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappingReport {
    pub delta: f64,
    /// `‖∇u‖ < ‖∇W‖` and `E_φ < (1-δ) E₁(W,0)`.
    pub hypotheses_hold: bool,
    /// `‖(u,u_t)‖_{Ḣ¹×L²} < (1 - 2δ/d)^{1/2} ‖∇W‖`.
    pub norm_bound_holds: bool,
    pub h_norm: f64,
    pub h_norm_bound: f64,
    /// `θ = (1 - 2δ/d)^{(2*-2)/2}`.
    pub theta: f64,
    /// `∫(|∇u|² - |u|^{2*}) / ∫|∇u|²`, expected in `[1-θ, 1]`.
    pub gradient_ratio: f64,
    pub gradient_ratio_bounds: (f64, f64),
    pub gradient_ratio_ok: bool,
    /// `(∫|u_t|² + ∫(|∇u|² - |u|^{2*})) / E_φ`, expected in
    /// `[2(1-θ), 2/(1 - 2θ/2*)]`.
    pub energy_ratio: f64,
    pub energy_ratio_bounds: (f64, f64),
    pub energy_ratio_ok: bool,
}

impl TrappingReport {
    pub fn all_pass(&self) -> bool {
        self.norm_bound_holds && self.gradient_ratio_ok && self.energy_ratio_ok
    }
}

/// A `δ` with `E_φ < (1-δ) E₁(W,0)`: half the relative gap below threshold.
pub fn trapping_delta(e_phi: f64, ground: &GroundStateConstants) -> Option<f64> {
    let gap = 1.0 - e_phi / ground.energy_e1;
    (gap > 0.0).then(|| (0.5 * gap).min(0.999))
}

/// Checks the three energy-trapping inequalities for a focusing state.
///
/// The ratio bounds follow from `∫|u|^{2*} <= θ ∫|∇u|²`, which holds under
/// the norm bound by the sharp Sobolev inequality.
pub fn trapping_check(
    state: &WaveState,
    spec: &CoefficientSpec,
    delta: f64,
    ground: &GroundStateConstants,
) -> Result<TrappingReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("need 0 < delta < 1, got {delta}")));
    }
    let d = state.grid().dim() as f64;
    let s = sobolev_exponent(state.grid().dim());
    let pc = pieces(state, spec);
    let e_phi = energy(state, spec, Sign::Focusing).total;
    let grad_w = ground.grad_norm();
    let h_norm = (pc.grad_sq + pc.kinetic_sq).sqrt();
    let h_norm_bound = (1.0 - 2.0 * delta / d).sqrt() * grad_w;
    let theta = (1.0 - 2.0 * delta / d).powf((s - 2.0) / 2.0);
    let g_bounds = (1.0 - theta, 1.0);
    let e_bounds = (2.0 * (1.0 - theta), 2.0 / (1.0 - 2.0 * theta / s));
    let (gradient_ratio, energy_ratio) = if pc.grad_sq == 0.0 && pc.kinetic_sq == 0.0 {
        (1.0, 1.0)
    } else {
        let gr = if pc.grad_sq > 0.0 {
            (pc.grad_sq - pc.l2star) / pc.grad_sq
        } else {
            1.0
        };
        (gr, (pc.kinetic_sq + pc.grad_sq - pc.l2star) / e_phi)
    };
    let trivial = pc.grad_sq == 0.0 && pc.kinetic_sq == 0.0;
    let within = |x: f64, b: (f64, f64)| trivial || (x >= b.0 * (1.0 - 1e-9) && x <= b.1 * (1.0 + 1e-9));
    Ok(TrappingReport {
        delta,
        hypotheses_hold: pc.grad_sq.sqrt() < grad_w && e_phi < (1.0 - delta) * ground.energy_e1,
        norm_bound_holds: h_norm < h_norm_bound,
        h_norm,
        h_norm_bound,
        theta,
        gradient_ratio,
        gradient_ratio_bounds: g_bounds,
        gradient_ratio_ok: within(gradient_ratio, g_bounds),
        energy_ratio,
        energy_ratio_bounds: e_bounds,
        energy_ratio_ok: within(energy_ratio, e_bounds),
    })
}

/// `∫|f|²/r² / ∫|f'|²`; at most `((d-2)/2)^{-2}` in the continuum.
pub fn hardy_ratio(f: &RadialField) -> f64 {
    let grid = f.grid();
    let w = grid.measure_weights();
    let df = radial_derivative(f);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..grid.len() {
        let r = grid.r(i);
        num += w[i] * (f.values()[i] / r).powi(2);
        den += w[i] * df.values()[i].powi(2);
    }
    num / den
}

/// `‖φ^{1/p_c} u‖^{p_c}_{L^{2p_c}}`; plain `L^{2p_c}` when `weight` is `None`.
pub fn y_integrand(u: &RadialField, weight: Option<&RadialField>) -> f64 {
    let grid = u.grid();
    let p = critical_power(grid.dim());
    let vals: Vec<f64> = match weight {
        Some(phi) => u
            .values()
            .iter()
            .zip(phi.values())
            .map(|(u, w)| w * w * u.abs().powf(2.0 * p))
            .collect(),
        None => u.values().iter().map(|u| u.abs().powf(2.0 * p)).collect(),
    };
    grid.integrate_values(&vals).max(0.0).powf(0.5)
}

/// Trapezoid-in-time accumulator of `∫ g(t) dt` for a nonnegative `g`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimeAccumulator {
    last: Option<(f64, f64)>,
    sum: f64,
}

impl TimeAccumulator {
    pub fn push(&mut self, t: f64, g: f64) {
        if let Some((t0, g0)) = self.last {
            self.sum += 0.5 * (t - t0) * (g0 + g);
        }
        self.last = Some((t, g));
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// `(∫_I ‖φ^{1/p_c} u(t)‖^{p_c}_{L^{2p_c}} dt)^{1/p_c}` over a sampled window,
/// trapezoid rule in time.
pub fn y_norm_accumulate(window: &[(f64, &RadialField)], weight: Option<&RadialField>) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    if window.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(invalid("window", "times must increase strictly"));
    }
    let p = critical_power(window[0].1.grid().dim());
    let mut acc = TimeAccumulator::default();
    for (t, u) in window {
        acc.push(*t, y_integrand(u, weight));
    }
    Ok(acc.total().powf(1.0 / p))
}

/// `∫ η |u|^{2*} / r dx` at one time, `η` the Morawetz weight.
pub fn morawetz_integrand(u: &RadialField, eta: &RadialField) -> f64 {
    let grid = u.grid();
    let w = grid.measure_weights();
    let s = sobolev_exponent(grid.dim());
    (1..grid.len())
        .map(|i| w[i] * eta.values()[i] * u.values()[i].abs().powf(s) / grid.r(i))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorawetzReport {
    pub lhs: f64,
    /// `2d/(d-1) · E_φ(u₀, u₁)`.
    pub bound: f64,
    pub margin: f64,
}

/// Space-time Morawetz integral over a sampled defocusing trajectory.
pub fn morawetz_accumulate(
    window: &[(f64, &RadialField)],
    spec: &CoefficientSpec,
    sign: Sign,
    initial_energy: f64,
) -> Result<MorawetzReport> {
    if sign != Sign::Defocusing {
        return Err(Error::HypothesisNotSatisfied(
            "the Morawetz bound applies to defocusing runs only".into(),
        ));
    }
    let Some((_, first)) = window.first() else {
        return Err(Error::EmptyWindow);
    };
    let grid = first.grid();
    let cert = check_defocusing_condition(spec, grid);
    if !cert.verdict.passed() {
        return Err(Error::HypothesisNotSatisfied(format!(
            "defocusing condition fails at r = {}",
            cert.argmin_r
        )));
    }
    let eta = morawetz_weight(spec, grid);
    let mut acc = TimeAccumulator::default();
    for (t, u) in window {
        acc.push(*t, morawetz_integrand(u, &eta));
    }
    Ok(morawetz_report(acc.total(), grid.dim(), initial_energy))
}

pub fn morawetz_report(lhs: f64, d: usize, initial_energy: f64) -> MorawetzReport {
    let d = d as f64;
    let bound = 2.0 * d / (d - 1.0) * initial_energy;
    MorawetzReport {
        lhs,
        bound,
        margin: bound - lhs,
    }
}

/// Localized virial quantities and their predicted time derivatives with
/// the exterior (`O(κ(R))`) terms dropped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirialReport {
    /// `∫(x·∇u) u_t φ_R + (d/2) ∫φ_R u u_t`
    pub g: f64,
    /// `-∫(|∇u|² - φ|u|^{2*}) - (1/2*) ∫(x·∇φ)|u|^{2*} φ_R`
    pub dg_dt_predicted: f64,
    /// `∫(x·∇u) u_t φ_R`
    pub transport: f64,
    /// `-(d/2)∫|u_t|² + ((d-2)/2)∫(|∇u|² - φ|u|^{2*}) - (1/2*)∫(x·∇φ)|u|^{2*}φ_R`
    pub transport_predicted: f64,
    /// `∫φ_R u u_t`
    pub mass: f64,
    /// `∫|u_t|² - ∫(|∇u|² - φ|u|^{2*})`
    pub mass_predicted: f64,
    pub kappa: f64,
}

/// Cutoff, coefficient and derived fields needed for virial quantities on one grid.
#[derive(Debug, Clone)]
pub struct VirialContext {
    pub cutoff: CutoffField,
    phi: RadialField,
    r_dphi: RadialField,
    spec: CoefficientSpec,
}

impl VirialContext {
    pub fn new(grid: &RadialGrid, spec: &CoefficientSpec, radius: f64) -> Result<Self> {
        if radius > grid.r_max() / 2.0 * (1.0 + 1e-12) {
            return Err(invalid("R", format!("need R <= r_max/2 = {}", grid.r_max() / 2.0)));
        }
        Ok(Self {
            cutoff: CutoffField::new(grid, radius)?,
            phi: spec.sample(grid),
            r_dphi: spec.sample_r_dphi(grid),
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn virial(&self, state: &WaveState) -> VirialReport {
        let grid = state.grid();
        let d = grid.dim() as f64;
        let s = sobolev_exponent(grid.dim());
        let w = grid.measure_weights();
        let du = radial_derivative(&state.u);
        let (u, ut, ur) = (state.u.values(), state.u_t.values(), du.values());
        let (cut, phi, rdphi) = (self.cutoff.value.values(), self.phi.values(), self.r_dphi.values());
        let mut acc = [0.0; 6];
        for i in 0..grid.len() {
            let r = grid.r(i);
            let us = u[i].abs().powf(s);
            acc[0] += w[i] * r * ur[i] * ut[i] * cut[i];
            acc[1] += w[i] * cut[i] * u[i] * ut[i];
            acc[2] += w[i] * ut[i] * ut[i];
            acc[3] += w[i] * ur[i] * ur[i];
            acc[4] += w[i] * phi[i] * us;
            acc[5] += w[i] * rdphi[i] * us * cut[i];
        }
        let [transport, mass, kin, grad, pot, weight_term] = acc;
        let transport_predicted = -(d / 2.0) * kin + ((d - 2.0) / 2.0) * (grad - pot) - weight_term / s;
        let mass_predicted = kin - (grad - pot);
        VirialReport {
            g: transport + (d / 2.0) * mass,
            dg_dt_predicted: transport_predicted + (d / 2.0) * mass_predicted,
            transport,
            transport_predicted,
            mass,
            mass_predicted,
            kappa: tail_kappa(state, self.cutoff.radius),
        }
    }

    /// `y_R = ∫u²φ_R`, `y_R' = 2∫u u_t φ_R`, and the predicted `y_R''`.
    pub fn blowup(&self, state: &WaveState) -> BlowupReport {
        let grid = state.grid();
        let d = grid.dim() as f64;
        let s = sobolev_exponent(grid.dim());
        let w = grid.measure_weights();
        let du = radial_derivative(&state.u);
        let (u, ut, ur) = (state.u.values(), state.u_t.values(), du.values());
        let (cut, dcut, phi) = (
            self.cutoff.value.values(),
            self.cutoff.d_dr.values(),
            self.phi.values(),
        );
        let (mut y, mut ydot, mut energy_density, mut kin, mut grad, mut cross) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..grid.len() {
            let uu = u[i];
            let e = 0.5 * ur[i] * ur[i] + 0.5 * ut[i] * ut[i] - phi[i] * uu.abs().powf(s) / s;
            y += w[i] * uu * uu * cut[i];
            ydot += w[i] * uu * ut[i] * cut[i];
            energy_density += w[i] * e * cut[i];
            kin += w[i] * ut[i] * ut[i] * cut[i];
            grad += w[i] * ur[i] * ur[i] * cut[i];
            cross += w[i] * ur[i] * dcut[i] * uu;
        }
        let y_ddot_predicted = -(4.0 * d / (d - 2.0)) * energy_density
            + (4.0 * (d - 1.0) / (d - 2.0)) * kin
            + (4.0 / (d - 2.0)) * grad
            - 2.0 * cross;
        BlowupReport {
            y,
            y_dot: 2.0 * ydot,
            y_ddot_predicted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlowupReport {
    pub y: f64,
    pub y_dot: f64,
    pub y_ddot_predicted: f64,
}

pub fn virial_g_r(state: &WaveState, spec: &CoefficientSpec, radius: f64) -> Result<VirialReport> {
    Ok(VirialContext::new(state.grid(), spec, radius)?.virial(state))
}

pub fn blowup_y_r(state: &WaveState, spec: &CoefficientSpec, radius: f64) -> Result<BlowupReport> {
    Ok(VirialContext::new(state.grid(), spec, radius)?.blowup(state))
}

/// `∫_{r>R} (|u_t|² + |∇u|² + |u|²/r² + |u|^{2*})` by the trapezoid rule on
/// nodes at or beyond `R` (which keeps it monotone in `R`).
pub fn tail_kappa(state: &WaveState, radius: f64) -> f64 {
    let grid = state.grid();
    let k = grid.index_at_or_above(radius);
    let n = grid.cells();
    if k >= n {
        return 0.0;
    }
    let s = sobolev_exponent(grid.dim());
    let area = sphere_area(grid.dim());
    let du = radial_derivative(&state.u);
    let (u, ut, ur) = (state.u.values(), state.u_t.values(), du.values());
    let density = |i: usize| {
        let r = grid.r(i);
        if r == 0.0 {
            return 0.0;
        }
        let v = ut[i] * ut[i] + ur[i] * ur[i] + (u[i] / r).powi(2) + u[i].abs().powf(s);
        area * r.powi(grid.dim() as i32 - 1) * v
    };
    let mut sum = 0.5 * (density(k) + density(n));
    for i in k + 1..n {
        sum += density(i);
    }
    sum * grid.dr()
}

/// One diagnostic row; the CSV columns in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    #[serde(rename = "E_total")]
    pub e_total: f64,
    #[serde(rename = "E_kinetic")]
    pub e_kinetic: f64,
    #[serde(rename = "E_gradient")]
    pub e_gradient: f64,
    #[serde(rename = "E_potential")]
    pub e_potential: f64,
    pub sup_norm: f64,
    pub h_norm: f64,
    pub y_norm_accum: f64,
    pub morawetz_accum: f64,
    #[serde(rename = "G_R")]
    pub g_r: f64,
    #[serde(rename = "y_R")]
    pub y_r: f64,
    #[serde(rename = "y_R_dot")]
    pub y_r_dot: f64,
    #[serde(rename = "kappa_R")]
    pub kappa_r: f64,
}

pub const TRACE_COLUMNS: [&str; 13] = [
    "t",
    "E_total",
    "E_kinetic",
    "E_gradient",
    "E_potential",
    "sup_norm",
    "h_norm",
    "y_norm_accum",
    "morawetz_accum",
    "G_R",
    "y_R",
    "y_R_dot",
    "kappa_R",
];

/// Per-row predicted derivatives, kept beside the CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialSample {
    pub t: f64,
    pub virial: VirialReport,
    pub blowup: BlowupReport,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub virial: Vec<VirialSample>,
    /// Solver Hamiltonian at each row; conserved to integrator accuracy.
    pub hamiltonian: Vec<(f64, HamiltonianParts)>,
    pub outcome: Option<Outcome>,
    pub dim: Option<usize>,
}

impl RunTrace {
    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Largest `|E(t) - E(0)|/|E(0)|` of the quadrature energy column.
    pub fn energy_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let scale = if first.e_total != 0.0 { first.e_total.abs() } else { 1.0 };
        self.rows
            .iter()
            .map(|r| (r.e_total - first.e_total).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn morawetz(&self) -> Option<MorawetzReport> {
        let (first, last) = (self.rows.first()?, self.rows.last()?);
        let d = self.dim?;
        Some(morawetz_report(last.morawetz_accum, d, first.e_total))
    }
}

/// Diagnostic settings for a traced run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Cutoff radius for the virial functionals; `None` means `r_max/2`.
    pub cutoff_radius: Option<f64>,
}

/// Builds a [`RunTrace`] from solver snapshots.
pub struct TraceRecorder {
    sign: Sign,
    ctx: VirialContext,
    eta: RadialField,
    phi: RadialField,
    p: f64,
    y_acc: TimeAccumulator,
    morawetz_acc: TimeAccumulator,
    pub trace: RunTrace,
}

impl TraceRecorder {
    pub fn new(grid: &RadialGrid, spec: &CoefficientSpec, sign: Sign, diag: &DiagnosticsConfig) -> Result<Self> {
        let radius = diag.cutoff_radius.unwrap_or(grid.r_max() / 2.0);
        let mut trace = RunTrace::default();
        trace.dim = Some(grid.dim());
        Ok(Self {
            sign,
            ctx: VirialContext::new(grid, spec, radius)?,
            eta: morawetz_weight(spec, grid),
            phi: spec.sample(grid),
            p: critical_power(grid.dim()),
            y_acc: TimeAccumulator::default(),
            morawetz_acc: TimeAccumulator::default(),
            trace,
        })
    }

    pub fn into_trace(self) -> RunTrace {
        self.trace
    }
}

impl Observer for TraceRecorder {
    fn observe(&mut self, snap: &Snapshot<'_>) {
        let state = snap.state;
        let t = state.t;
        let e = energy(state, self.ctx.spec(), self.sign);
        self.y_acc.push(t, y_integrand(&state.u, Some(&self.phi)));
        self.morawetz_acc.push(t, morawetz_integrand(&state.u, &self.eta));
        let virial = self.ctx.virial(state);
        let blowup = self.ctx.blowup(state);
        let sup_norm = state.u.sup_norm();
        self.trace.rows.push(TraceRow {
            t,
            e_total: e.total,
            e_kinetic: e.kinetic,
            e_gradient: e.gradient,
            e_potential: e.potential,
            sup_norm,
            h_norm: (2.0 * (e.kinetic + e.gradient)).sqrt(),
            y_norm_accum: self.y_acc.total().powf(1.0 / self.p),
            morawetz_accum: self.morawetz_acc.total(),
            g_r: virial.g,
            y_r: blowup.y,
            y_r_dot: blowup.y_dot,
            kappa_r: virial.kappa,
        });
        self.trace.virial.push(VirialSample {
            t,
            virial,
            blowup,
            sup_norm,
        });
        self.trace.hamiltonian.push((t, snap.hamiltonian));
    }
}

/// Evolve with a [`TraceRecorder`] attached.
pub fn evolve_traced(
    initial: &WaveState,
    config: &SolverConfig,
    diag: &DiagnosticsConfig,
) -> Result<(Evolution, RunTrace)> {
    let mut rec = TraceRecorder::new(initial.grid(), &config.coefficient, config.sign, diag)?;
    let ev = evolve(initial, config, &mut rec)?;
    let mut trace = rec.into_trace();
    trace.outcome = Some(ev.outcome());
    Ok((ev, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state;
    use approx::assert_relative_eq;

    fn w_state(grid: &RadialGrid, a: f64) -> WaveState {
        let u = ground_state::sample(grid, 1.0).unwrap().scaled(a);
        WaveState::new(u, RadialField::zeros(grid), 0.0).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff_value(0.5, 1.0), 1.0);
        assert_eq!(cutoff_value(1.0, 1.0), 1.0);
        assert_eq!(cutoff_value(2.0, 1.0), 0.0);
        assert_eq!(cutoff_value(3.0, 1.0), 0.0);
        assert_relative_eq!(cutoff_value(1.5, 1.0), 0.5);
        for k in 0..=100 {
            let r = 1.0 + k as f64 / 100.0;
            let v = cutoff_value(r, 1.0);
            assert!((0.0..=1.0).contains(&v));
        }
        let h = 1e-6;
        for &r in &[1.2, 1.5, 1.9] {
            let fd = (cutoff_value(r + h, 1.0) - cutoff_value(r - h, 1.0)) / (2.0 * h);
            assert_relative_eq!(cutoff_derivative(r, 1.0), fd, max_relative = 1e-7);
        }
        assert!(CutoffField::new(&RadialGrid::new(3, 4.0, 16).unwrap(), 0.0).is_err());
    }

    #[test]
    fn energy_of_ground_state() {
        let g = RadialGrid::new(3, 1e4, 1 << 20).unwrap();
        let c = GroundStateConstants::for_dim(3).unwrap();
        let s = w_state(&g, 1.0);
        let one = CoefficientSpec::constant(1.0);
        // gradient tail beyond r_max: 4π·3/r_max
        let tail = 0.5 * 4.0 * std::f64::consts::PI * 3.0 / 1e4;
        let e = energy(&s, &one, Sign::Focusing);
        assert_relative_eq!(e.total + tail, c.energy_e1, max_relative = 1e-5);
        let e = energy(&s, &one, Sign::Defocusing);
        assert_relative_eq!(e.total + tail, (0.5 + 1.0 / 6.0) * c.grad_norm_sq, max_relative = 1e-5);
        assert_relative_eq!(e.total, 8.547, max_relative = 1e-3);
    }

    #[test]
    fn zero_state_everything_zero() {
        let g = RadialGrid::new(3, 20.0, 200).unwrap();
        let z = WaveState::zeros(&g);
        let spec = CoefficientSpec::sinh_power(2.0);
        assert_eq!(energy(&z, &spec, Sign::Focusing), Energy::default());
        let v = virial_g_r(&z, &spec, 5.0).unwrap();
        assert_eq!((v.g, v.dg_dt_predicted, v.kappa), (0.0, 0.0, 0.0));
        let b = blowup_y_r(&z, &spec, 5.0).unwrap();
        assert_eq!(b, BlowupReport::default());
        assert_eq!(tail_kappa(&z, 3.0), 0.0);
        let rep = trapping_check(&z, &spec, 0.5, GroundStateConstants::for_dim(3).unwrap()).unwrap();
        assert!(rep.norm_bound_holds);
        assert_eq!((rep.gradient_ratio, rep.energy_ratio), (1.0, 1.0));
    }

    #[test]
    fn trapping_below_and_above() {
        let g = RadialGrid::new(3, 400.0, 40_000).unwrap();
        let ground = GroundStateConstants::for_dim(3).unwrap();
        let spec = CoefficientSpec::sinh_power(2.0);
        let small = w_state(&g, 0.3);
        let e = energy(&small, &spec, Sign::Focusing).total;
        let delta = trapping_delta(e, ground).unwrap();
        let rep = trapping_check(&small, &spec, delta, ground).unwrap();
        assert!(rep.hypotheses_hold && rep.all_pass(), "{rep:?}");
        let big = w_state(&g, 1.5);
        let rep = trapping_check(&big, &spec, 0.1, ground).unwrap();
        assert!(!rep.norm_bound_holds);
        assert!(trapping_check(&big, &spec, 1.0, ground).is_err());
    }

    #[test]
    fn hardy_ratio_bounded() {
        let g = RadialGrid::new(3, 40.0, 4000).unwrap();
        for (c, w) in [(5.0, 1.0), (0.0, 2.0), (10.0, 0.3)] {
            let f = RadialField::from_fn(&g, |r: f64| (-((r - c) / w).powi(2)).exp());
            assert!(hardy_ratio(&f) <= 4.01);
        }
    }

    #[test]
    fn y_norm_window() {
        let g = RadialGrid::new(3, 10.0, 200).unwrap();
        let z = RadialField::zeros(&g);
        assert_eq!(y_norm_accumulate(&[(0.0, &z), (1.0, &z)], None).unwrap(), 0.0);
        assert_eq!(y_norm_accumulate(&[], None), Err(Error::EmptyWindow));
        let u = RadialField::from_fn(&g, |r| (-r * r).exp());
        let window: Vec<_> = (0..=10).map(|k| (k as f64 / 10.0, &u)).collect();
        let lp = crate::grid::lp_norm(&u, 10.0).unwrap();
        assert_relative_eq!(y_norm_accumulate(&window, None).unwrap(), lp, max_relative = 1e-12);
    }

    #[test]
    fn morawetz_rejects_focusing() {
        let g = RadialGrid::new(3, 10.0, 200).unwrap();
        let z = RadialField::zeros(&g);
        let spec = CoefficientSpec::gaussian(1.0);
        assert!(matches!(
            morawetz_accumulate(&[(0.0, &z)], &spec, Sign::Focusing, 0.0),
            Err(Error::HypothesisNotSatisfied(_))
        ));
        let rep = morawetz_accumulate(&[(0.0, &z), (1.0, &z)], &spec, Sign::Defocusing, 0.0).unwrap();
        assert_eq!((rep.lhs, rep.bound), (0.0, 0.0));
    }

    #[test]
    fn kappa_monotone_in_radius() {
        let g = RadialGrid::new(3, 20.0, 2000).unwrap();
        let s = w_state(&g, 1.0);
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let kap = tail_kappa(&s, k as f64 * 0.5);
            assert!(kap <= prev);
            prev = kap;
        }
    }
}
