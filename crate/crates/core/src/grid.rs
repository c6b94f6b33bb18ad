//! Uniform-grid function representation on `[0, 1]` and trapezoidal quadrature.
//!
//! Every function in the pipeline (densities, CDFs, quantiles, warpings,
//! SRSFs, tangent vectors, eigenfunctions) lives on the same uniform grid
//! `{0, 1/(G-1), ..., 1}`. All integrals use the composite trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 512;

/// Real-valued function sampled on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps `values`; requires at least two grid points.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 points, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self { values }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid_points(grid_size).into_iter().map(f).collect())
    }

    pub fn constant(grid_size: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; grid_size])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid spacing `1/(G-1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values)
    }

    /// `∫ self · other` by the trapezoid rule.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(inner_product(&self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        inner_product(&self.values, &self.values).sqrt()
    }

    /// `max |self - other|` over grid points.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `∫ |self - other|`.
    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(trapezoid(&diff))
    }

    /// `(∫ (self - other)²)^{1/2}`.
    pub fn l2_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(inner_product(&diff, &diff).sqrt())
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

/// Uniform grid `{0, 1/(G-1), ..., 1}`.
pub fn grid_points(grid_size: usize) -> Vec<f64> {
    let denom = (grid_size.max(2) - 1) as f64;
    (0..grid_size).map(|k| k as f64 / denom).collect()
}

/// Composite trapezoid weights for a uniform grid of `grid_size` points on `[0, 1]`.
pub fn trapezoid_weights(grid_size: usize) -> Vec<f64> {
    let h = 1.0 / (grid_size - 1) as f64;
    let mut w = vec![h; grid_size];
    w[0] = 0.5 * h;
    w[grid_size - 1] = 0.5 * h;
    w
}

/// Trapezoidal integral over `[0, 1]` of uniformly sampled values.
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    let interior: f64 = values[1..n - 1].iter().sum();
    h * (interior + 0.5 * (values[0] + values[n - 1]))
}

/// Trapezoidal `∫ a·b` for equal-length samples.
pub fn inner_product(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    let interior: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    h * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

/// Cumulative trapezoid starting at 0.
pub fn cumulative_trapezoid(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = 1.0 / (n.max(2) - 1) as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..n {
        acc += 0.5 * h * (values[k - 1] + values[k]);
        out.push(acc);
    }
    out
}

/// Linear interpolation of uniformly sampled `values` at `x ∈ [0, 1]`.
pub fn interpolate(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let pos = x.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (pos.floor() as usize).min(n - 2);
    let t = pos - k as f64;
    values[k] * (1.0 - t) + values[k + 1] * t
}

/// Evaluates the inverse of a nondecreasing piecewise-linear function on the
/// uniform grid at level `y`.
///
/// `values` must be nondecreasing. Levels outside `[values[0], values[last]]`
/// map to the nearest endpoint. On flat stretches the smallest preimage is
/// returned.
pub fn inverse_at(values: &[f64], y: f64) -> f64 {
    let n = values.len();
    if y <= values[0] {
        return 0.0;
    }
    if y >= values[n - 1] {
        return 1.0;
    }
    // first index with values[idx] >= y; idx ≥ 1 here
    let idx = values.partition_point(|&v| v < y);
    let lo = values[idx - 1];
    let hi = values[idx];
    let t = if hi > lo { (y - lo) / (hi - lo) } else { 0.0 };
    ((idx - 1) as f64 + t) / (n - 1) as f64
}
