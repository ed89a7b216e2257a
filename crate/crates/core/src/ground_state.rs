//! The static solution `W(r) = (1 + r²/(d(d-2)))^{-(d-2)/2}` of
//! `-ΔW = W^{p_c}`, its scalings, and the constants built from it.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{critical_power, laplacian, sobolev_exponent, sphere_area, RadialField, RadialGrid};

fn check_dim(d: usize) -> Result<()> {
    if (3..=5).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

fn base(d: usize, r: f64) -> f64 {
    let d = d as f64;
    1.0 + r * r / (d * (d - 2.0))
}

/// `W(r)`.
pub fn value(d: usize, r: f64) -> f64 {
    base(d, r).powf(-(d as f64 - 2.0) / 2.0)
}

/// `W'(r) = -(r/d) (1 + r²/(d(d-2)))^{-d/2}`.
pub fn derivative(d: usize, r: f64) -> f64 {
    -(r / d as f64) * base(d, r).powf(-(d as f64) / 2.0)
}

/// `λ^{-(d-2)/2} W(r/λ)`.
pub fn rescaled(d: usize, lambda: f64, r: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda.powf(-(d as f64 - 2.0) / 2.0) * value(d, r / lambda))
}

pub fn rescaled_derivative(d: usize, lambda: f64, r: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda.powf(-(d as f64) / 2.0) * derivative(d, r / lambda))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid("lambda", format!("need lambda > 0, got {lambda}")))
    }
}

/// `W_λ` sampled on a grid.
pub fn sample(grid: &RadialGrid, lambda: f64) -> Result<RadialField> {
    check_lambda(lambda)?;
    let d = grid.dim();
    let amp = lambda.powf(-(d as f64 - 2.0) / 2.0);
    Ok(RadialField::from_fn(grid, |r| amp * value(d, r / lambda)))
}

/// Quadrature resolution for the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub r_max: f64,
    pub n: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            r_max: 1e4,
            n: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateConstants {
    pub d: usize,
    pub sobolev_exponent: f64,
    pub critical_power: f64,
    /// `‖∇W‖²`
    pub grad_norm_sq: f64,
    /// `‖W‖_{2*}^{2*}`
    pub l2star_pow: f64,
    /// `E₁(W, 0) = ‖∇W‖²/d`
    #[serde(rename = "energy_E1")]
    pub energy_e1: f64,
    /// Sharp Sobolev constant `‖W‖_{2*}/‖∇W‖`.
    #[serde(rename = "sobolev_C")]
    pub sobolev_c: f64,
    /// Exterior contributions beyond `r_max`, already included above.
    pub tail_correction_grad: f64,
    pub tail_correction_l2star: f64,
    /// Bound on the remaining quadrature and truncation error (absolute).
    pub truncation_error_bound: f64,
    pub policy: GridPolicy,
}

impl GroundStateConstants {
    pub fn grad_norm(&self) -> f64 {
        self.grad_norm_sq.sqrt()
    }

    /// Cached constants at the default policy.
    pub fn for_dim(d: usize) -> Result<&'static GroundStateConstants> {
        static CACHE: [OnceLock<GroundStateConstants>; 3] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        check_dim(d)?;
        Ok(CACHE[d - 3].get_or_init(|| {
            ground_state_constants(d, GridPolicy::default()).expect("default policy is valid")
        }))
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `∫_0^{r_max} f` at resolutions `n` and `n/2`, plus the exterior
/// `∫_{r_max}^∞ f` through `r = r_max/s`. Returns (total, tail, error bound).
fn integral_with_tail(f: impl Fn(f64) -> f64 + Copy, policy: GridPolicy) -> (f64, f64, f64) {
    let core = simpson(f, 0.0, policy.r_max, policy.n);
    let core_half = simpson(f, 0.0, policy.r_max, policy.n / 2);
    let r0 = policy.r_max;
    let mapped = move |s: f64| {
        // the s → 0 limit is finite for these integrands; approach it
        let s = s.max(1e-12);
        f(r0 / s) * r0 / (s * s)
    };
    let tail = simpson(mapped, 0.0, 1.0, 4096);
    let tail_half = simpson(mapped, 0.0, 1.0, 2048);
    // Simpson: error of the finer rule is about (coarse - fine)/15.
    let err = (core - core_half).abs() / 15.0 + (tail - tail_half).abs() / 15.0;
    (core + tail, tail, err)
}

pub fn ground_state_constants(d: usize, policy: GridPolicy) -> Result<GroundStateConstants> {
    check_dim(d)?;
    if !(policy.r_max > 0.0) {
        return Err(Error::NonPositiveRadius(policy.r_max));
    }
    if policy.n < 8 {
        return Err(Error::TooFewCells(policy.n));
    }
    let area = sphere_area(d);
    let s = sobolev_exponent(d);
    let k = d as i32 - 1;
    let (grad, grad_tail, grad_err) =
        integral_with_tail(|r| derivative(d, r).powi(2) * r.powi(k), policy);
    let (l2s, l2s_tail, l2s_err) =
        integral_with_tail(|r| value(d, r).powf(s) * r.powi(k), policy);
    let grad_norm_sq = area * grad;
    let l2star_pow = area * l2s;
    Ok(GroundStateConstants {
        d,
        sobolev_exponent: s,
        critical_power: critical_power(d),
        grad_norm_sq,
        l2star_pow,
        energy_e1: grad_norm_sq / d as f64,
        sobolev_c: l2star_pow.powf(1.0 / s) / grad_norm_sq.sqrt(),
        tail_correction_grad: area * grad_tail,
        tail_correction_l2star: area * l2s_tail,
        truncation_error_bound: area * (grad_err + l2s_err),
        policy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sup: f64,
    pub at_r: f64,
}

/// `sup |-Δf - |f|^{p_c-1} f|` over interior nodes, with the discrete
/// radial Laplacian.
pub fn elliptic_residual(f: &RadialField) -> Residual {
    let p = critical_power(f.grid().dim());
    let lap = laplacian(f);
    let n = f.grid().cells();
    let mut out = Residual { sup: 0.0, at_r: 0.0 };
    for i in 1..n {
        let u = f.values()[i];
        let res = (-lap.values()[i] - u.abs().powf(p - 1.0) * u).abs();
        if res > out.sup {
            out = Residual {
                sup: res,
                at_r: f.grid().r(i),
            };
        }
    }
    out
}

/// Residual of `W` itself on `grid`; pure discretization error.
pub fn stationarity_residual(grid: &RadialGrid) -> Residual {
    let d = grid.dim();
    elliptic_residual(&RadialField::from_fn(grid, |r| value(d, r)))
}
