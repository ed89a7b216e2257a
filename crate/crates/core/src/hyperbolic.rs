//! Radial functions on hyperbolic space `ℍ³` and the map
//! `(𝐓f)(r) = (sinh r / r) f(r)` onto radial functions on `ℝ³`.
//!
//! `𝐓` is an isometry `L²(ℍ³) → L²(ℝ³)` and `H^{0,1}(ℍ³) → Ḣ¹(ℝ³)`, and it
//! intertwines `-Δ_{ℍ³} - 1` with `-Δ_{ℝ³}`. The shifted focusing wave
//! equation `v_tt - (Δ_{ℍ³} + 1) v = |v|⁴ v` therefore becomes the Euclidean
//! equation with coefficient `(r/sinh r)⁴`, and is solved through it.
//!
//! Fields live on a `d = 3` [`RadialGrid`] whose radius is geodesic distance.

use serde::{Deserialize, Serialize};

use crate::classifier::{coarsen, decide, Prediction, Rule, Thresholds};
use crate::coefficients::CoefficientSpec;
use crate::error::{invalid, Error, Result};
use crate::evolution::{evolve, Evolution, Sign, Snapshot, SolverConfig, WaveState};
use crate::grid::{laplacian, radial_derivative, simpson_coefficients, RadialField, RadialGrid};
use crate::ground_state::GroundStateConstants;
use crate::initial_data::{DataFamily, DEFAULT_CUTOFF};

/// `r / sinh r`, accurate at the origin and on the far tail.
fn inverse_ratio(r: f64) -> f64 {
    CoefficientSpec::sinh_power(1.0).value(r)
}

/// The Euclidean coefficient `(r/sinh r)⁴` of the transformed equation.
pub fn transformed_coefficient() -> CoefficientSpec {
    CoefficientSpec::sinh_power(4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct H3RadialField {
    field: RadialField,
}

impl H3RadialField {
    pub fn new(field: RadialField) -> Result<Self> {
        if field.grid().dim() != 3 {
            return Err(Error::UnsupportedDimension(field.grid().dim()));
        }
        if !field.is_finite() {
            return Err(Error::NonFinite("hyperbolic field"));
        }
        Ok(Self { field })
    }

    pub fn from_fn(grid: &RadialGrid, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(RadialField::from_fn(grid, f))
    }

    pub fn zeros(grid: &RadialGrid) -> Result<Self> {
        Self::new(RadialField::zeros(grid))
    }

    pub fn grid(&self) -> &RadialGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn as_field(&self) -> &RadialField {
        &self.field
    }

    pub fn sup_norm(&self) -> f64 {
        self.field.sup_norm()
    }
}

pub fn t_forward(f: &H3RadialField) -> RadialField {
    f.field.map_with_r(|r, v| v / inverse_ratio(r))
}

pub fn t_inverse(g: &RadialField) -> Result<H3RadialField> {
    H3RadialField::new(g.map_with_r(|r, v| v * inverse_ratio(r)))
}

/// Simpson weights for `∫ f dμ` with `dμ = 4π sinh²r dr`.
fn measure_weights(grid: &RadialGrid) -> Vec<f64> {
    let four_pi = 4.0 * std::f64::consts::PI;
    simpson_coefficients(grid.cells(), grid.dr())
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let s = grid.r(i).sinh();
            four_pi * c * s * s
        })
        .collect()
}

fn h3_integrate(grid: &RadialGrid, values: impl Iterator<Item = f64>) -> f64 {
    measure_weights(grid).iter().zip(values).map(|(w, v)| w * v).sum()
}

pub fn h3_l2_norm(f: &H3RadialField) -> f64 {
    h3_integrate(f.grid(), f.values().iter().map(|v| v * v)).max(0.0).sqrt()
}

/// The two terms of `‖f‖²_{H^{0,1}} = ∫|∇f|² dμ - ∫|f|² dμ`, kept apart
/// because their difference can be small against either.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H01Parts {
    pub gradient: f64,
    pub mass: f64,
}

impl H01Parts {
    pub fn norm_sq(&self) -> f64 {
        self.gradient - self.mass
    }
}

pub fn h01_parts(f: &H3RadialField) -> H01Parts {
    let df = radial_derivative(&f.field);
    H01Parts {
        gradient: h3_integrate(f.grid(), df.values().iter().map(|v| v * v)),
        mass: h3_integrate(f.grid(), f.values().iter().map(|v| v * v)),
    }
}

/// `‖f‖_{H^{0,1}}`; an error if the discrete form is not positive.
pub fn h01_norm(f: &H3RadialField) -> Result<f64> {
    let sq = h01_parts(f).norm_sq();
    if sq < 0.0 {
        return Err(Error::DegenerateData(format!("H^(0,1) form is negative ({sq:.3e})")));
    }
    Ok(sq.sqrt())
}

/// Radial `Δ_{ℍ³} f = f'' + 2 coth r f'`, with `3 f''(0)` at the origin.
/// The outer node is left at zero.
pub fn h3_laplacian(f: &H3RadialField) -> H3RadialField {
    let g = f.grid();
    let (n, h) = (g.cells(), g.dr());
    let v = f.values();
    let mut out = vec![0.0; n + 1];
    out[0] = 3.0 * 2.0 * (v[1] - v[0]) / (h * h);
    for i in 1..n {
        let second = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let first = (v[i + 1] - v[i - 1]) / (2.0 * h);
        out[i] = second + 2.0 * first / g.r(i).tanh();
    }
    H3RadialField {
        field: RadialField::new(g.clone(), out).expect("same grid"),
    }
}

/// `sup |(-Δ_{ℝ³})(𝐓f) - 𝐓[(-Δ_{ℍ³} - 1) f]|` over all nodes but the last.
pub fn intertwining_residual(f: &H3RadialField) -> f64 {
    let lhs = laplacian(&t_forward(f));
    let lap = h3_laplacian(f);
    let n = f.grid().cells();
    (0..n)
        .map(|i| {
            let r = f.grid().r(i);
            let rhs = -(lap.values()[i] + f.values()[i]) / inverse_ratio(r);
            (-lhs.values()[i] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Energy {
    pub total: f64,
    pub norm: H01Parts,
    pub kinetic: f64,
    /// `∫|v|⁶ dμ / 6`.
    pub potential: f64,
}

/// `½‖v‖²_{H^{0,1}} + ½‖v_t‖²_{L²} - ⅙‖v‖⁶_{L⁶}` on `ℍ³`.
pub fn h3_energy(v: &H3RadialField, v_t: &H3RadialField) -> Result<H3Energy> {
    if v.grid() != v_t.grid() {
        return Err(Error::GridMismatch);
    }
    let norm = h01_parts(v);
    let kinetic = 0.5 * h3_integrate(v.grid(), v_t.values().iter().map(|x| x * x));
    let potential = h3_integrate(v.grid(), v.values().iter().map(|x| x.powi(6))) / 6.0;
    Ok(H3Energy {
        total: 0.5 * norm.norm_sq() + kinetic - potential,
        norm,
        kinetic,
        potential,
    })
}

/// Radial data families on `ℍ³`, with `v_t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum H3Family {
    /// `𝐓⁻¹(a W_λ φ_{R_c})`.
    PulledBackGroundState {
        a: f64,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Smooth bump in geodesic distance.
    CompactBump { amplitude: f64, center: f64, width: f64 },
}

fn one() -> f64 {
    1.0
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

impl H3Family {
    /// The same profile read as a Euclidean family.
    fn euclidean(&self) -> DataFamily {
        match *self {
            Self::PulledBackGroundState { a, lambda, cutoff } => DataFamily::ScaledGroundState { a, lambda, cutoff },
            Self::CompactBump { amplitude, center, width } => DataFamily::CompactBump { amplitude, center, width },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.euclidean().validate()
    }

    pub fn profile(&self, r: f64) -> f64 {
        let base = self.euclidean().profile(3, r);
        match self {
            Self::PulledBackGroundState { .. } => base * inverse_ratio(r),
            Self::CompactBump { .. } => base,
        }
    }

    pub fn build(&self, grid: &RadialGrid) -> Result<(H3RadialField, H3RadialField)> {
        self.validate()?;
        Ok((H3RadialField::from_fn(grid, |r| self.profile(r))?, H3RadialField::zeros(grid)?))
    }

    pub fn support_estimate(&self) -> f64 {
        self.euclidean().support_estimate()
    }

    pub fn label(&self) -> String {
        format!("h3[{}]", self.euclidean().label())
    }
}

/// A pulled-back snapshot of an `ℍ³` run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Sample {
    pub t: f64,
    pub energy: f64,
    pub norm_sq: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone)]
pub struct H3Run {
    pub evolution: Evolution,
    pub samples: Vec<H3Sample>,
    pub final_v: H3RadialField,
    pub final_v_t: H3RadialField,
}

impl H3Run {
    /// Largest relative change of the `ℍ³` energy over the samples.
    pub fn energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let scale = if first.energy != 0.0 { first.energy.abs() } else { 1.0 };
        self.samples
            .iter()
            .map(|s| (s.energy - first.energy).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Solver settings for the transformed equation: focusing, coefficient
/// `(r/sinh r)⁴`.
pub fn h3_solver_config(cfl: f64, t_final: f64) -> SolverConfig {
    SolverConfig::new(cfl, t_final, Sign::Focusing, transformed_coefficient())
}

/// Evolves `(v0, v1)` by mapping to `ℝ³`, solving there, and pulling every
/// snapshot back.
pub fn h3_solve(v0: &H3RadialField, v1: &H3RadialField, config: &SolverConfig) -> Result<H3Run> {
    if config.coefficient != transformed_coefficient() || config.sign != Sign::Focusing {
        return Err(invalid(
            "config",
            "the hyperbolic equation maps to the focusing equation with sinh_power(4)",
        ));
    }
    let initial = WaveState::new(t_forward(v0), t_forward(v1), 0.0)?;
    let mut samples = Vec::new();
    let mut failure = None;
    let mut observer = |snap: &Snapshot<'_>| {
        let pulled = t_inverse(&snap.state.u).and_then(|v| Ok((v, t_inverse(&snap.state.u_t)?)));
        match pulled.and_then(|(v, vt)| Ok((h3_energy(&v, &vt)?, v.sup_norm()))) {
            Ok((e, sup)) => samples.push(H3Sample {
                t: snap.state.t,
                energy: e.total,
                norm_sq: e.norm.norm_sq(),
                sup_norm: sup,
            }),
            Err(err) => {
                failure.get_or_insert(err);
            }
        }
    };
    let evolution = evolve(&initial, config, &mut observer)?;
    if let Some(err) = failure {
        // a non-finite snapshot ends the run; it is reported by the outcome
        if evolution.final_state.is_finite() {
            return Err(err);
        }
    }
    let final_v = t_inverse(&evolution.final_state.u).unwrap_or_else(|_| H3RadialField {
        field: evolution.final_state.u.clone(),
    });
    let final_v_t = t_inverse(&evolution.final_state.u_t).unwrap_or_else(|_| H3RadialField {
        field: evolution.final_state.u_t.clone(),
    });
    Ok(H3Run {
        evolution,
        samples,
        final_v,
        final_v_t,
    })
}

fn measure_h3(v0: &H3RadialField, v1: &H3RadialField) -> Result<(f64, f64)> {
    let e = h3_energy(v0, v1)?;
    Ok((e.total, e.norm.norm_sq().max(0.0).sqrt()))
}

/// Threshold prediction evaluated directly on `ℍ³`: energy gate below
/// `E₁(W,0)` and the sign of `‖∇W‖ - ‖v₀‖_{H^{0,1}}`.
pub fn h3_predict(v0: &H3RadialField, v1: &H3RadialField, ground: &GroundStateConstants) -> Result<Prediction> {
    if ground.d != 3 {
        return Err(invalid("ground", "hyperbolic thresholds use the d = 3 ground state"));
    }
    let (e, g) = measure_h3(v0, v1)?;
    let coarse = coarsen(&WaveState::new(v0.field.clone(), v1.field.clone(), 0.0)?)?;
    let (ec, gc) = measure_h3(&H3RadialField::new(coarse.u)?, &H3RadialField::new(coarse.u_t)?)?;
    let m = crate::classifier::Measurement {
        energy: e,
        energy_err: (e - ec).abs() / 3.0,
        grad_norm: g,
        grad_err: (g - gc).abs() / 3.0,
    };
    Ok(decide(m, Thresholds::ground(ground, 1.0, 1.0), Rule::HyperbolicThreshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{predict_focusing, Regime};
    use crate::coefficients::{certification_grid, check_focusing_condition};
    use crate::functionals::energy;
    use crate::grid::{h1_seminorm, lp_norm};

    fn gaussian(grid: &RadialGrid) -> H3RadialField {
        H3RadialField::from_fn(grid, |r| (-r * r).exp()).unwrap()
    }

    fn bump(grid: &RadialGrid) -> H3RadialField {
        let f = H3Family::CompactBump {
            amplitude: 1.0,
            center: 1.5,
            width: 0.5,
        };
        f.build(grid).unwrap().0
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = RadialGrid::new(3, 10.0, 256).unwrap();
        let z = H3RadialField::zeros(&g).unwrap();
        assert_eq!(t_forward(&z).sup_norm(), 0.0);
        assert_eq!(intertwining_residual(&z), 0.0);
        assert_eq!(h3_energy(&z, &z).unwrap().total, 0.0);
    }

    #[test]
    fn origin_value_is_kept() {
        let g = RadialGrid::new(3, 10.0, 256).unwrap();
        let f = H3RadialField::from_fn(&g, |_| 2.0).unwrap();
        assert_eq!(t_forward(&f).values()[0], 2.0);
    }

    #[test]
    fn round_trip() {
        let g = RadialGrid::new(3, 12.0, 4096).unwrap();
        let f = gaussian(&g);
        let back = t_inverse(&t_forward(&f)).unwrap();
        let err = f.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-14, "{err}");
    }

    #[test]
    fn l2_isometry() {
        let g = RadialGrid::new(3, 12.0, 4096).unwrap();
        let f = gaussian(&g);
        assert!(rel(lp_norm(&t_forward(&f), 2.0).unwrap(), h3_l2_norm(&f)) < 1e-8);
    }

    #[test]
    fn sobolev_isometry() {
        for f in [
            gaussian(&RadialGrid::new(3, 12.0, 4096).unwrap()),
            bump(&RadialGrid::new(3, 4.0, 4096).unwrap()),
        ] {
            let lhs = h01_norm(&f).unwrap();
            let rhs = h1_seminorm(&t_forward(&f));
            assert!(rel(lhs, rhs) < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn intertwining_is_second_order() {
        for make in [gaussian as fn(&RadialGrid) -> H3RadialField, bump] {
            let r1 = intertwining_residual(&make(&RadialGrid::new(3, 8.0, 1024).unwrap()));
            let r2 = intertwining_residual(&make(&RadialGrid::new(3, 8.0, 2048).unwrap()));
            assert!(r1 / r2 > 3.5, "{r1} {r2}");
        }
    }

    #[test]
    fn energy_matches_transformed_energy() {
        let g = RadialGrid::new(3, 8.0, 4096).unwrap();
        let v = bump(&g);
        let vt = H3RadialField::from_fn(&g, |r| 0.3 * (-(r - 1.0) * (r - 1.0) * 4.0).exp() * (r < 6.0) as u8 as f64)
            .unwrap();
        let e = h3_energy(&v, &vt).unwrap().total;
        let state = WaveState::new(t_forward(&v), t_forward(&vt), 0.0).unwrap();
        let euclid = energy(&state, &transformed_coefficient(), Sign::Focusing).total;
        assert!(rel(e, euclid) < 1e-6, "{e} vs {euclid}");
    }

    #[test]
    fn energy_homogeneity() {
        let g = RadialGrid::new(3, 4.0, 2048).unwrap();
        let v = bump(&g);
        let z = H3RadialField::zeros(&g).unwrap();
        let base = h3_energy(&v, &z).unwrap();
        for eps in [0.1, 0.5] {
            let scaled = H3RadialField::new(v.as_field().scaled(eps)).unwrap();
            let e = h3_energy(&scaled, &z).unwrap().total;
            let expect = eps.powi(2) * 0.5 * base.norm.norm_sq() - eps.powi(6) * base.potential;
            assert!(rel(e, expect) < 1e-12);
        }
    }

    #[test]
    fn coefficient_passes_focusing_condition() {
        let report = check_focusing_condition(&transformed_coefficient(), &certification_grid(3).unwrap());
        assert!(report.verdict.passed());
    }

    #[test]
    fn prediction_matches_transformed_prediction() {
        let ground = GroundStateConstants::for_dim(3).unwrap();
        let g = RadialGrid::new(3, 20.0, 4096).unwrap();
        for a in [0.0, 0.25, 0.5, 0.75, 1.5, 1.75, 2.0] {
            let fam = H3Family::PulledBackGroundState {
                a,
                lambda: 0.25,
                cutoff: 8.0,
            };
            let (v0, v1) = fam.build(&g).unwrap();
            let p = h3_predict(&v0, &v1, ground).unwrap();
            let euclid = WaveState::new(t_forward(&v0), t_forward(&v1), 0.0).unwrap();
            let q = predict_focusing(&euclid, &transformed_coefficient(), ground).unwrap();
            assert_eq!(p.verdict, q.verdict, "a = {a}");
            let expect = if a < 1.0 { Regime::Scatter } else { Regime::BlowUp };
            assert_eq!(p.verdict, expect, "a = {a}: {p:?}");
        }
    }

    #[test]
    fn solve_conserves_energy() {
        let g = RadialGrid::new(3, 8.0, 4096).unwrap();
        let fam = H3Family::CompactBump {
            amplitude: 0.1,
            center: 1.5,
            width: 0.5,
        };
        let (v0, v1) = fam.build(&g).unwrap();
        let ground = GroundStateConstants::for_dim(3).unwrap();
        assert_eq!(h3_predict(&v0, &v1, ground).unwrap().verdict, Regime::Scatter);
        let run = h3_solve(&v0, &v1, &h3_solver_config(0.5, 4.0)).unwrap();
        assert_eq!(run.evolution.end, crate::evolution::RunEnd::Completed);
        assert!(run.samples.len() > 10);
        assert!(run.energy_drift() < 1e-4, "{}", run.energy_drift());
    }

    #[test]
    fn solve_rejects_other_equations() {
        let g = RadialGrid::new(3, 8.0, 256).unwrap();
        let z = H3RadialField::zeros(&g).unwrap();
        let cfg = SolverConfig::new(0.5, 1.0, Sign::Focusing, CoefficientSpec::constant(1.0));
        assert!(h3_solve(&z, &z, &cfg).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = RadialGrid::new(3, 8.0, 256).unwrap();
        let z = H3RadialField::zeros(&g).unwrap();
        let run = h3_solve(&z, &z, &h3_solver_config(0.5, 1.0)).unwrap();
        assert_eq!(run.final_v.sup_norm(), 0.0);
        let p = h3_predict(&z, &z, GroundStateConstants::for_dim(3).unwrap()).unwrap();
        assert_eq!(p.verdict, Regime::Scatter);
    }
}
