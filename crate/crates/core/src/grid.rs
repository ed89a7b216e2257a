//! Uniform radial grid on `[0, r_max]` with quadrature against the radial
//! measure `ω_{d-1} r^{d-1} dr`, finite-difference radial derivatives and the
//! Lebesgue / energy norms that the rest of the crate consumes.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Surface area of the unit sphere `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        // |S^{d-1}| = 2π/(d-2) · |S^{d-3}|
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

/// Critical Sobolev exponent `2* = 2d/(d-2)`.
pub fn sobolev_exponent(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 - 2.0)
}

/// Energy-critical power `p_c = 1 + 4/(d-2)`.
pub fn critical_power(d: usize) -> f64 {
    1.0 + 4.0 / (d as f64 - 2.0)
}

/// Composite Simpson coefficients (already multiplied by `h`) on `n` cells.
/// Odd `n` closes the last three cells with the 3/8 rule.
pub fn simpson_coefficients(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let simpson_cells = if n % 2 == 0 { n } else { n - 3 };
    for i in (0..simpson_cells).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if n % 2 == 1 {
        let s = simpson_cells;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    d: usize,
    r_max: f64,
    n: usize,
    dr: f64,
    /// Simpson coefficients on `[0, r_max]`, no radial weight.
    line_weights: Arc<[f64]>,
    /// Simpson coefficients times `ω_{d-1} r^{d-1}`.
    measure_weights: Arc<[f64]>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n && self.r_max == other.r_max
    }
}

impl RadialGrid {
    pub fn new(d: usize, r_max: f64, n: usize) -> Result<Self> {
        if !(3..=5).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::NonPositiveRadius(r_max));
        }
        if n < 8 {
            return Err(Error::TooFewCells(n));
        }
        let dr = r_max / n as f64;
        let line: Vec<f64> = simpson_coefficients(n, dr);
        let area = sphere_area(d);
        let measure: Vec<f64> = line
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let r = if i == n { r_max } else { i as f64 * dr };
                w * area * r.powi(d as i32 - 1)
            })
            .collect();
        Ok(Self {
            d,
            r_max,
            n,
            dr,
            line_weights: line.into(),
            measure_weights: measure.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of cells; there are `n + 1` nodes.
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        if i == self.n {
            self.r_max
        } else {
            i as f64 * self.dr
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |i| self.r(i))
    }

    pub fn line_weights(&self) -> &[f64] {
        &self.line_weights
    }

    pub fn measure_weights(&self) -> &[f64] {
        &self.measure_weights
    }

    /// `ω_{d-1} ∫_0^{r_max} f(r) r^{d-1} dr` for nodal samples `f`.
    pub fn integrate_values(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.measure_weights
            .iter()
            .zip(f)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Same grid with twice as many cells.
    pub fn refined(&self) -> Self {
        Self::new(self.d, self.r_max, 2 * self.n).expect("refinement of a valid grid is valid")
    }

    /// Index of the first node with `r >= radius` (clamped to `n`).
    pub fn index_at_or_above(&self, radius: f64) -> usize {
        if radius <= 0.0 {
            return 0;
        }
        ((radius / self.dr).ceil() as usize).min(self.n)
    }
}

/// Behaviour of derivatives at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parity {
    /// Radial function smooth at the origin: `f'(0) = 0`.
    #[default]
    Even,
    /// No symmetry assumed: one-sided stencil at the origin.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &RadialGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().map(&mut f).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise map that also sees the node radius.
    pub fn map_with_r(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.r(i), v))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Largest node radius where `|f|` exceeds `threshold`, 0 if none.
    pub fn support_radius(&self, threshold: f64) -> f64 {
        self.values
            .iter()
            .rposition(|v| v.abs() > threshold)
            .map_or(0.0, |i| self.grid.r(i))
    }
}

/// `ω_{d-1} ∫_0^{r_max} f(r) r^{d-1} dr` by composite Simpson.
pub fn integrate(f: &RadialField) -> f64 {
    f.grid.integrate_values(&f.values)
}

/// Second-order finite-difference `df/dr`; zero at the origin for even fields.
pub fn radial_derivative(f: &RadialField) -> RadialField {
    radial_derivative_with(f, Parity::Even)
}

pub fn radial_derivative_with(f: &RadialField, parity: Parity) -> RadialField {
    let v = &f.values;
    let n = f.grid.n;
    let h = f.grid.dr;
    let mut out = vec![0.0; n + 1];
    out[0] = match parity {
        Parity::Even => 0.0,
        Parity::General => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h),
    };
    for i in 1..n {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    RadialField {
        grid: f.grid.clone(),
        values: out,
    }
}

/// Discrete radial Laplacian `f'' + (d-1) f'/r` of an even field.
///
/// At the origin the symmetric limit `d·f''(0)` is used with
/// `f''(0) ≈ 2 (f_1 - f_0)/dr²`; the outer node uses a one-sided stencil.
pub fn laplacian(f: &RadialField) -> RadialField {
    let v = &f.values;
    let n = f.grid.n;
    let h = f.grid.dr;
    let d = f.grid.d as f64;
    let mut out = vec![0.0; n + 1];
    out[0] = d * 2.0 * (v[1] - v[0]) / (h * h);
    for i in 1..n {
        let r = f.grid.r(i);
        let second = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let first = (v[i + 1] - v[i - 1]) / (2.0 * h);
        out[i] = second + (d - 1.0) * first / r;
    }
    let second = (2.0 * v[n] - 5.0 * v[n - 1] + 4.0 * v[n - 2] - v[n - 3]) / (h * h);
    let first = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    out[n] = second + (d - 1.0) * first / f.grid.r_max;
    RadialField {
        grid: f.grid.clone(),
        values: out,
    }
}

/// `‖f‖_{L^p}`.
pub fn lp_norm(f: &RadialField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let powered: Vec<f64> = f.values.iter().map(|v| v.abs().powf(p)).collect();
    Ok(f.grid.integrate_values(&powered).max(0.0).powf(1.0 / p))
}

/// `‖f‖_{Ḣ¹} = (∫ |f'|² dμ)^{1/2}`.
pub fn h1_seminorm(f: &RadialField) -> f64 {
    h1_seminorm_sq(f).sqrt()
}

pub fn h1_seminorm_sq(f: &RadialField) -> f64 {
    let df = radial_derivative(f);
    let sq: Vec<f64> = df.values.iter().map(|v| v * v).collect();
    f.grid.integrate_values(&sq).max(0.0)
}

/// `‖(f, g)‖_{Ḣ¹×L²}`.
pub fn pair_h_norm(f: &RadialField, g: &RadialField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let l2 = lp_norm(g, 2.0)?;
    Ok((h1_seminorm_sq(f) + l2 * l2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub p: f64,
    pub lp: f64,
    pub h1_seminorm: f64,
    pub pair_h_norm: f64,
}

pub fn norms(f: &RadialField, g: &RadialField, p: f64) -> Result<Norms> {
    Ok(Norms {
        p,
        lp: lp_norm(f, p)?,
        h1_seminorm: h1_seminorm(f),
        pair_h_norm: pair_h_norm(f, g)?,
    })
}
