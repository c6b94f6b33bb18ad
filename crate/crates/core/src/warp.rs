//! Warping functions between densities and their tangent-space representation.
//!
//! A density `f` is related to the reference CDF `F*` through the warping
//! `γ(x) = F⁻¹(F*(x))`, so that `F(γ(x)) = F*(x)`. Warpings are mapped to
//! square-root slope functions `q = √γ̇` (points on the unit sphere of
//! `L²[0, 1]`) and then linearised by the inverse exponential map at the
//! identity SRSF `q ≡ 1`.

use serde::{Deserialize, Serialize};

use crate::distsummary::{mix_with_uniform, PdfOnGrid};
use crate::error::{Error, Result};
use crate::grid::{self, cumulative_trapezoid, inverse_at, GridFunction};

/// Lower clamp applied to warping slopes before the square root.
pub const SLOPE_FLOOR: f64 = 1e-8;
/// Below this angle the tangent vector is the exact zero vector.
pub const ANGLE_EPS: f64 = 1e-8;

macro_rules! grid_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(GridFunction);

        impl $name {
            pub fn grid_size(&self) -> usize {
                self.0.len()
            }

            pub fn values(&self) -> &[f64] {
                self.0.values()
            }

            pub fn as_grid(&self) -> &GridFunction {
                &self.0
            }

            pub fn into_grid(self) -> GridFunction {
                self.0
            }
        }
    };
}

grid_newtype!(
    /// Cumulative distribution function on the grid: starts at 0, ends at 1,
    /// nondecreasing.
    CdfOnGrid
);
grid_newtype!(
    /// Quantile function sampled at uniform probabilities.
    QuantileOnGrid
);
grid_newtype!(
    /// Boundary-preserving nondecreasing self-map of `[0, 1]`.
    WarpOnGrid
);
grid_newtype!(
    /// Square-root slope function of a warping, unit L² norm.
    SrsfOnGrid
);
grid_newtype!(
    /// Element of the tangent space at the identity SRSF.
    TangentVec
);

fn check_endpoints_monotone(values: &[f64], what: &str) -> Result<()> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidCdf(format!("{what} needs at least 2 grid points")));
    }
    if values[0].abs() > 1e-12 || (values[n - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidCdf(format!(
            "{what} must run from 0 to 1, got {} .. {}",
            values[0],
            values[n - 1]
        )));
    }
    if values.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidCdf(format!("{what} is not monotone")));
    }
    Ok(())
}

impl CdfOnGrid {
    /// Validates endpoints and monotonicity.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_endpoints_monotone(&values, "cdf")?;
        Ok(Self(GridFunction::new(values)?))
    }

    /// Identity CDF of the uniform distribution.
    pub fn uniform(grid_size: usize) -> Result<Self> {
        Self::new(grid::grid_points(grid_size))
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values().windows(2).all(|w| w[1] > w[0])
    }

    fn require_strict(&self) -> Result<()> {
        if self.is_strictly_increasing() {
            Ok(())
        } else {
            Err(Error::InvalidCdf("cdf is not strictly increasing".into()))
        }
    }
}

impl QuantileOnGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_endpoints_monotone(&values, "quantile function")?;
        Ok(Self(GridFunction::new(values)?))
    }
}

impl WarpOnGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_endpoints_monotone(&values, "warping function")?;
        Ok(Self(GridFunction::new(values)?))
    }

    pub fn identity(grid_size: usize) -> Result<Self> {
        Self::new(grid::grid_points(grid_size))
    }
}

impl SrsfOnGrid {
    /// Normalizes nonnegative values to unit L² norm.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let g = GridFunction::new(values)?;
        if g.values().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("srsf values must be nonnegative".into()));
        }
        let norm = g.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("srsf has zero norm".into()));
        }
        Ok(Self(GridFunction::from_vec_unchecked(
            g.into_values().into_iter().map(|v| v / norm).collect(),
        )))
    }
}

impl TangentVec {
    pub fn from_grid(g: GridFunction) -> Self {
        Self(g)
    }
}

/// Cumulative trapezoid of the density, rescaled to end exactly at 1.
pub fn cdf_of(f: &PdfOnGrid) -> CdfOnGrid {
    let mut c = cumulative_trapezoid(f.values());
    let total = *c.last().unwrap();
    for v in c.iter_mut() {
        *v /= total;
    }
    let last = c.len() - 1;
    c[0] = 0.0;
    c[last] = 1.0;
    CdfOnGrid(GridFunction::from_vec_unchecked(c))
}

/// Monotone piecewise-linear inverse of `cdf`, sampled at uniform probabilities.
pub fn quantile_of(cdf: &CdfOnGrid) -> Result<QuantileOnGrid> {
    cdf.require_strict()?;
    let g = cdf.grid_size();
    let vals = cdf.values();
    let mut q: Vec<f64> = grid::grid_points(g)
        .into_iter()
        .map(|p| inverse_at(vals, p))
        .collect();
    q[0] = 0.0;
    q[g - 1] = 1.0;
    Ok(QuantileOnGrid(GridFunction::from_vec_unchecked(q)))
}

/// CDF whose quantile function is the pointwise mean of the training
/// quantile functions. Inputs should already be mixed with the uniform.
pub fn reference_cdf(training: &[PdfOnGrid]) -> Result<CdfOnGrid> {
    let first = training
        .first()
        .ok_or_else(|| Error::InsufficientData("reference needs training densities".into()))?;
    let g = first.grid_size();
    let mut mean_q = vec![0.0; g];
    for f in training {
        if f.grid_size() != g {
            return Err(Error::GridMismatch {
                expected: g,
                got: f.grid_size(),
            });
        }
        let q = quantile_of(&cdf_of(f))?;
        for (m, v) in mean_q.iter_mut().zip(q.values()) {
            *m += v;
        }
    }
    let n = training.len() as f64;
    for m in mean_q.iter_mut() {
        *m /= n;
    }
    let mut c: Vec<f64> = grid::grid_points(g)
        .into_iter()
        .map(|x| inverse_at(&mean_q, x))
        .collect();
    c[0] = 0.0;
    c[g - 1] = 1.0;
    Ok(CdfOnGrid(GridFunction::from_vec_unchecked(c)))
}

/// Warping `γ = F_i⁻¹ ∘ F*`, i.e. the map with `F_i(γ(x)) = F*(x)`.
pub fn extract_warping(cdf: &CdfOnGrid, reference: &CdfOnGrid) -> Result<WarpOnGrid> {
    cdf.as_grid().check_same_grid(reference.as_grid())?;
    cdf.require_strict()?;
    reference.require_strict()?;
    let vals = cdf.values();
    let g = cdf.grid_size();
    let mut w: Vec<f64> = reference.values().iter().map(|&y| inverse_at(vals, y)).collect();
    w[0] = 0.0;
    w[g - 1] = 1.0;
    Ok(WarpOnGrid(GridFunction::from_vec_unchecked(w)))
}

/// Finite-difference slope: central inside, second-order one-sided at the ends.
fn slope(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let inv_h = (n - 1) as f64;
    let mut d = vec![0.0; n];
    if n == 2 {
        let s = (values[1] - values[0]) * inv_h;
        return vec![s, s];
    }
    for k in 1..n - 1 {
        d[k] = 0.5 * (values[k + 1] - values[k - 1]) * inv_h;
    }
    d[0] = 0.5 * (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv_h;
    d[n - 1] = 0.5 * (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv_h;
    d
}

/// SRSF `q = √γ̇`, renormalized to unit norm.
pub fn srsf_of(gamma: &WarpOnGrid) -> SrsfOnGrid {
    let q: Vec<f64> = slope(gamma.values())
        .into_iter()
        .map(|s| s.max(SLOPE_FLOOR).sqrt())
        .collect();
    // a valid warping always has positive total slope, so the norm is > 0
    SrsfOnGrid::normalized(q).expect("srsf of a valid warping has positive norm")
}

/// Angle between `q` and the identity SRSF.
pub fn srsf_angle(q: &SrsfOnGrid) -> f64 {
    grid::trapezoid(q.values()).clamp(-1.0, 1.0).acos()
}

/// Inverse exponential map at `q_e ≡ 1`: `v = θ/sin θ · (q − cos θ)`.
pub fn tangent_map(q: &SrsfOnGrid) -> TangentVec {
    let theta = srsf_angle(q);
    let g = q.grid_size();
    if theta < ANGLE_EPS {
        return TangentVec(GridFunction::from_vec_unchecked(vec![0.0; g]));
    }
    let c = theta.cos();
    let scale = theta / theta.sin();
    TangentVec(GridFunction::from_vec_unchecked(
        q.values().iter().map(|v| scale * (v - c)).collect(),
    ))
}

/// Full chain density → mixed density → CDF → warping → SRSF → tangent vector.
pub fn pdf_to_tangent(f: &PdfOnGrid, reference: &CdfOnGrid, alpha_mix: f64) -> Result<TangentVec> {
    let mixed = mix_with_uniform(f, alpha_mix)?;
    let gamma = extract_warping(&cdf_of(&mixed), reference)?;
    Ok(tangent_map(&srsf_of(&gamma)))
}
