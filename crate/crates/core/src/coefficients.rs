//! Coefficient families φ(r) multiplying the nonlinearity, and grid-scan
//! certificates for the structural sign conditions they must satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{sobolev_exponent, RadialField, RadialGrid};

/// Below this radius `sinh_power` switches to its Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;
/// Strict inequalities must clear this.
pub const TOL_STRICT: f64 = 1e-12;
/// Non-strict inequalities may undershoot zero by this much.
pub const TOL_NONSTRICT: f64 = 1e-12;
/// Scan nodes with φ below this are certified through the normalized form.
const TAIL_PHI: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Constant { c: f64 },
    SinhPower { sigma: f64 },
    Gaussian { alpha: f64 },
    /// Piecewise-linear samples, held constant past the last knot.
    Table { r: Vec<f64>, phi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub value: f64,
    pub d_dr: f64,
}

impl CoefficientSpec {
    pub fn constant(c: f64) -> Self {
        Self::Constant { c }
    }

    pub fn sinh_power(sigma: f64) -> Self {
        Self::SinhPower { sigma }
    }

    pub fn gaussian(alpha: f64) -> Self {
        Self::Gaussian { alpha }
    }

    pub fn table(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let spec = Self::Table { r, phi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { c } => {
                if !(*c > 0.0 && *c <= 1.0) {
                    return Err(invalid("c", format!("need 0 < c <= 1, got {c}")));
                }
            }
            Self::SinhPower { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma", format!("need sigma > 0, got {sigma}")));
                }
            }
            Self::Gaussian { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid("alpha", format!("need alpha > 0, got {alpha}")));
                }
            }
            Self::Table { r, phi } => {
                if r.len() != phi.len() {
                    return Err(invalid("table", "r and phi differ in length"));
                }
                if r.len() < 2 {
                    return Err(invalid("table", "need at least two samples"));
                }
                if r[0] != 0.0 {
                    return Err(invalid("table", "first knot must be r = 0"));
                }
                if r.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                    return Err(invalid("table", "knots must be strictly increasing"));
                }
                if phi.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                    return Err(invalid("table", "values must lie in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant { c } => format!("constant({c})"),
            Self::SinhPower { sigma } => format!("sinh_power({sigma})"),
            Self::Gaussian { alpha } => format!("gaussian({alpha})"),
            Self::Table { r, .. } => format!("table({} knots)", r.len()),
        }
    }

    /// Whether `φ(r) → 0` as `r → ∞` for this family.
    pub fn decays_at_infinity(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::Table { .. } => false,
            Self::SinhPower { .. } | Self::Gaussian { .. } => true,
        }
    }

    /// `φ(r)` and `φ'(r)`.
    pub fn eval(&self, r: f64) -> PhiValue {
        match self {
            Self::Constant { c } => PhiValue {
                value: *c,
                d_dr: 0.0,
            },
            Self::SinhPower { sigma } => {
                if r < SERIES_CUTOFF {
                    PhiValue {
                        value: 1.0 - sigma * r * r / 6.0,
                        d_dr: -sigma * r / 3.0,
                    }
                } else {
                    let value = (sigma * (r.ln() - ln_sinh(r))).exp();
                    PhiValue {
                        value,
                        d_dr: sigma * value * (1.0 / r - 1.0 / r.tanh()),
                    }
                }
            }
            Self::Gaussian { alpha } => {
                let value = (-alpha * r * r).exp();
                PhiValue {
                    value,
                    d_dr: -2.0 * alpha * r * value,
                }
            }
            Self::Table { r: knots, phi } => {
                let last = knots.len() - 1;
                if r >= knots[last] {
                    return PhiValue {
                        value: phi[last],
                        d_dr: 0.0,
                    };
                }
                // segment k covers [knots[k], knots[k+1])
                let k = knots.partition_point(|&x| x <= r).saturating_sub(1);
                let slope = (phi[k + 1] - phi[k]) / (knots[k + 1] - knots[k]);
                PhiValue {
                    value: phi[k] + slope * (r - knots[k]),
                    d_dr: slope,
                }
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).value
    }

    /// `φ'(r)/φ(r)`, finite even where `φ` underflows.
    pub fn log_derivative(&self, r: f64) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::SinhPower { sigma } => {
                if r < SERIES_CUTOFF {
                    -sigma * r / 3.0
                } else {
                    sigma * (1.0 / r - 1.0 / r.tanh())
                }
            }
            Self::Gaussian { alpha } => -2.0 * alpha * r,
            Self::Table { .. } => {
                let p = self.eval(r);
                p.d_dr / p.value
            }
        }
    }

    pub fn sample(&self, grid: &RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| self.value(r))
    }

    /// Nodal samples of `r·φ'(r)`.
    pub fn sample_r_dphi(&self, grid: &RadialGrid) -> RadialField {
        RadialField::from_fn(grid, |r| r * self.eval(r).d_dr)
    }

    /// Smallest knot spacing of a table, `None` for analytic families.
    fn table_resolution(&self) -> Option<f64> {
        match self {
            Self::Table { r, .. } => r.windows(2).map(|w| w[1] - w[0]).reduce(f64::min),
            _ => None,
        }
    }
}

fn ln_sinh(r: f64) -> f64 {
    if r < 20.0 {
        r.sinh().ln()
    } else {
        r + (-(-2.0 * r).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

/// `φ - (d-2) r φ' / (2(d-1))`, the defocusing-condition integrand.
pub fn defocusing_integrand(spec: &CoefficientSpec, d: usize, r: f64) -> f64 {
    let p = spec.eval(r);
    let d = d as f64;
    p.value - (d - 2.0) * r * p.d_dr / (2.0 * (d - 1.0))
}

/// `2*(1 - φ) + r φ'`, the focusing-condition integrand.
pub fn focusing_integrand(spec: &CoefficientSpec, d: usize, r: f64) -> f64 {
    let p = spec.eval(r);
    sobolev_exponent(d) * (1.0 - p.value) + r * p.d_dr
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    /// `φ - (d-2) x·∇φ / (2(d-1)) > 0`
    Defocusing,
    /// `2*(1 - φ) + x·∇φ >= 0`
    Focusing,
    /// `0 < φ <= 1` and `φ → 0` at infinity
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
}

impl From<&RadialGrid> for GridInfo {
    fn from(g: &RadialGrid) -> Self {
        Self {
            d: g.dim(),
            r_max: g.r_max(),
            n: g.cells(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub coefficient: String,
    /// Minimum of the condition integrand over scanned nodes with `φ >= 1e-6`.
    pub min_value: f64,
    pub argmin_r: f64,
    pub verdict: Verdict,
    pub grid: GridInfo,
    /// For the defocusing condition: sign of the integrand divided by `φ`
    /// on the underflow tail, where the raw integrand is below tolerance.
    pub tail_certified: Option<bool>,
    /// Table knots finer than the scan spacing; the scan may miss segments.
    pub coarse_grid_warning: bool,
}

/// Default certification grid: `10^5` cells out to `r = 50`.
pub fn certification_grid(d: usize) -> Result<RadialGrid> {
    RadialGrid::new(d, 50.0, 100_000)
}

fn scan(grid: &RadialGrid, mut g: impl FnMut(f64) -> f64, mut keep: impl FnMut(f64) -> bool) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut arg = 0.0;
    for r in grid.nodes() {
        if !keep(r) {
            continue;
        }
        let v = g(r);
        if v < min {
            min = v;
            arg = r;
        }
    }
    (min, arg)
}

fn coarse(spec: &CoefficientSpec, grid: &RadialGrid) -> bool {
    spec.table_resolution()
        .is_some_and(|h| h < 2.0 * grid.dr())
}

pub fn check_defocusing_condition(spec: &CoefficientSpec, grid: &RadialGrid) -> ConditionReport {
    let d = grid.dim();
    let (min_value, argmin_r) = scan(
        grid,
        |r| defocusing_integrand(spec, d, r),
        |r| spec.value(r) >= TAIL_PHI,
    );
    let has_tail = grid.nodes().any(|r| spec.value(r) < TAIL_PHI);
    let tail_certified = has_tail.then(|| {
        let dd = d as f64;
        let (tail_min, _) = scan(
            grid,
            |r| 1.0 - (dd - 2.0) * r * spec.log_derivative(r) / (2.0 * (dd - 1.0)),
            |r| spec.value(r) < TAIL_PHI,
        );
        tail_min > TOL_STRICT
    });
    let verdict = Verdict::from_bool(min_value > TOL_STRICT && tail_certified != Some(false));
    ConditionReport {
        condition: ConditionId::Defocusing,
        coefficient: spec.label(),
        min_value,
        argmin_r,
        verdict,
        grid: grid.into(),
        tail_certified,
        coarse_grid_warning: coarse(spec, grid),
    }
}

pub fn check_focusing_condition(spec: &CoefficientSpec, grid: &RadialGrid) -> ConditionReport {
    let d = grid.dim();
    let (min_value, argmin_r) = scan(grid, |r| focusing_integrand(spec, d, r), |_| true);
    ConditionReport {
        condition: ConditionId::Focusing,
        coefficient: spec.label(),
        min_value,
        argmin_r,
        verdict: Verdict::from_bool(min_value >= -TOL_NONSTRICT),
        grid: grid.into(),
        tail_certified: None,
        coarse_grid_warning: coarse(spec, grid),
    }
}

/// Range `(0, 1]` on every node, plus decay at infinity from the family.
/// `min_value` is the smaller of `min φ` and `1 - max φ`.
pub fn check_decay_condition(spec: &CoefficientSpec, grid: &RadialGrid) -> ConditionReport {
    let (min_phi, arg_lo) = scan(grid, |r| spec.value(r), |_| true);
    let (min_slack, arg_hi) = scan(grid, |r| 1.0 - spec.value(r), |_| true);
    let (min_value, argmin_r) = if min_phi <= min_slack {
        (min_phi, arg_lo)
    } else {
        (min_slack, arg_hi)
    };
    // φ may underflow on the far tail of a Gaussian; positivity there is analytic.
    let positive = min_phi > 0.0 || spec.decays_at_infinity();
    let ok = positive && min_slack >= -TOL_NONSTRICT && spec.decays_at_infinity();
    ConditionReport {
        condition: ConditionId::Decay,
        coefficient: spec.label(),
        min_value,
        argmin_r,
        verdict: Verdict::from_bool(ok),
        grid: grid.into(),
        tail_certified: None,
        coarse_grid_warning: coarse(spec, grid),
    }
}

/// The Morawetz weight, node-for-node the defocusing-condition integrand.
pub fn morawetz_weight(spec: &CoefficientSpec, grid: &RadialGrid) -> RadialField {
    let d = grid.dim();
    RadialField::from_fn(grid, |r| defocusing_integrand(spec, d, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scan_grid() -> RadialGrid {
        RadialGrid::new(3, 50.0, 20_000).unwrap()
    }

    #[test]
    fn sinh_power_at_origin() {
        let p = CoefficientSpec::sinh_power(2.0).eval(0.0);
        assert_eq!(p.value, 1.0);
        assert_eq!(p.d_dr, 0.0);
    }

    #[test]
    fn sinh_power_at_one() {
        let v = CoefficientSpec::sinh_power(2.0).value(1.0);
        assert_relative_eq!(v, 1.0 / 1.0_f64.sinh().powi(2), max_relative = 1e-14);
        assert_relative_eq!(v, 0.7240616609663105, max_relative = 1e-12);
    }

    #[test]
    fn sinh_power_series_matches_closed_form_at_cutoff() {
        let s = CoefficientSpec::sinh_power(3.0);
        let below = s.eval(SERIES_CUTOFF * (1.0 - 1e-9));
        let above = s.eval(SERIES_CUTOFF * (1.0 + 1e-9));
        assert_relative_eq!(below.value, above.value, max_relative = 1e-12);
        assert_relative_eq!(below.d_dr, above.d_dr, max_relative = 1e-6);
    }

    #[test]
    fn sinh_power_derivative_by_finite_difference() {
        let s = CoefficientSpec::sinh_power(2.5);
        for &r in &[0.01_f64, 0.5, 1.0, 3.0, 25.0] {
            let h = 1e-6 * r.max(1.0);
            let fd = (s.value(r + h) - s.value(r - h)) / (2.0 * h);
            assert_relative_eq!(s.eval(r).d_dr, fd, max_relative = 1e-6, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_family() {
        let p = CoefficientSpec::constant(1.0).eval(7.3);
        assert_eq!((p.value, p.d_dr), (1.0, 0.0));
    }

    #[test]
    fn validation() {
        assert!(CoefficientSpec::constant(0.0).validate().is_err());
        assert!(CoefficientSpec::constant(1.5).validate().is_err());
        assert!(CoefficientSpec::sinh_power(0.0).validate().is_err());
        assert!(CoefficientSpec::gaussian(-1.0).validate().is_err());
        assert!(CoefficientSpec::table(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(CoefficientSpec::table(vec![0.0, 0.0], vec![1.0, 0.5]).is_err());
        assert!(CoefficientSpec::table(vec![0.0, 1.0], vec![1.0, 0.5]).is_ok());
    }

    #[test]
    fn json_shape() {
        let s: CoefficientSpec = serde_json::from_str(r#"{"family":"sinh_power","sigma":2.0}"#).unwrap();
        assert_eq!(s, CoefficientSpec::sinh_power(2.0));
        let j = serde_json::to_string(&CoefficientSpec::constant(0.5)).unwrap();
        assert_eq!(j, r#"{"family":"constant","c":0.5}"#);
    }

    #[test]
    fn table_interpolates() {
        let t = CoefficientSpec::table(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        assert_relative_eq!(t.value(0.5), 0.75);
        assert_relative_eq!(t.eval(1.5).d_dr, -0.25);
        assert_relative_eq!(t.value(9.0), 0.25);
        assert_eq!(t.eval(9.0).d_dr, 0.0);
    }

    #[test]
    fn defocusing_checks() {
        let g = scan_grid();
        assert!(check_defocusing_condition(&CoefficientSpec::constant(1.0), &g).verdict.passed());
        let gauss = check_defocusing_condition(&CoefficientSpec::gaussian(1.0), &g);
        assert!(gauss.verdict.passed());
        assert_eq!(gauss.tail_certified, Some(true));
    }

    /// `1 - r` on `[0, 1)`, then a jump back up to 0.01. The rising segment
    /// on `[0.999, 1)` has slope 9, so the integrand there is `φ - 9r/4`,
    /// smallest at the knot `r = 0.999`.
    pub(crate) fn rising_table() -> CoefficientSpec {
        let mut r: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let mut phi: Vec<f64> = r.iter().map(|x| 1.0 - x).collect();
        r.push(1.0);
        phi.push(0.01);
        CoefficientSpec::table(r, phi).unwrap()
    }

    #[test]
    fn defocusing_fails_on_rising_table() {
        let g = certification_grid(3).unwrap();
        let rep = check_defocusing_condition(&rising_table(), &g);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!((rep.argmin_r - 1.0).abs() < 2e-3, "argmin {}", rep.argmin_r);
        // dense-scan oracle: -2.24675 at r = 0.999
        assert_relative_eq!(rep.min_value, 0.001 - 0.999 * 2.25, max_relative = 1e-9);
    }

    #[test]
    fn focusing_checks() {
        let g = scan_grid();
        let c = check_focusing_condition(&CoefficientSpec::constant(1.0), &g);
        assert!(c.verdict.passed());
        assert_eq!(c.min_value, 0.0);
        for sigma in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let rep = check_focusing_condition(&CoefficientSpec::sinh_power(sigma), &g);
            assert!(rep.verdict.passed(), "sigma {sigma}: {rep:?}");
        }
    }

    #[test]
    fn decay_checks() {
        let g = scan_grid();
        assert!(check_decay_condition(&CoefficientSpec::gaussian(1.0), &g).verdict.passed());
        assert!(check_decay_condition(&CoefficientSpec::sinh_power(2.0), &g).verdict.passed());
        assert!(!check_decay_condition(&CoefficientSpec::constant(1.0), &g).verdict.passed());
    }

    #[test]
    fn morawetz_weight_values() {
        let g = RadialGrid::new(3, 4.0, 400).unwrap();
        let one = morawetz_weight(&CoefficientSpec::constant(1.0), &g);
        assert!(one.values().iter().all(|&v| v == 1.0));
        let gauss = morawetz_weight(&CoefficientSpec::gaussian(1.0), &g);
        assert_relative_eq!(gauss.values()[100], 1.5 * (-1.0f64).exp(), max_relative = 1e-14);
        let s = morawetz_weight(&CoefficientSpec::sinh_power(2.0), &g);
        assert!(s.values().iter().all(|&v| v > 0.0));
    }
}
