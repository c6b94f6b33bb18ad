//! Functional principal component analysis and the two monitoring features.
//!
//! The covariance operator of the training functions is discretized with
//! trapezoidal quadrature weights `W` and symmetrized as `W^{1/2} C W^{1/2}`,
//! so eigenfunctions come out orthonormal in the trapezoidal inner product.
//! When there are fewer training functions than grid points the same
//! eigenpairs are obtained from the `N × N` Gram matrix, which is what
//! [`fit_fpca`] does by default.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_product, trapezoid_weights, GridFunction};
use crate::warp::CdfOnGrid;

/// Default proportion of variance the retained components must explain.
pub const DEFAULT_VAR_FRAC: f64 = 0.99;
/// Eigenvalues at or below this multiple of the largest are treated as null.
pub const EIGEN_FLOOR_REL: f64 = 1e-12;
const MIN_TRAINING: usize = 5;
const MIN_TOTAL_VARIANCE: f64 = 1e-12;

/// Which eigenproblem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenRoute {
    /// `N × N` Gram matrix of the weighted, centered data.
    Gram,
    /// `G × G` weighted covariance matrix.
    Covariance,
}

/// Trained functional PCA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcModel {
    pub grid_size: usize,
    pub mean_fn: GridFunction,
    /// Retained eigenfunctions `φ_1 .. φ_L`.
    pub eigenfunctions: Vec<GridFunction>,
    /// All non-null eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub retained: usize,
    pub var_frac: f64,
    /// Reference CDF the tangent vectors were built against; absent when the
    /// model was fitted on densities directly.
    pub reference_cdf: Option<CdfOnGrid>,
    pub n_training: usize,
}

/// Hotelling T² and SPE of one observation; `index` is the 1-based position
/// in the monitored stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub t2: f64,
    pub spe: f64,
    pub index: usize,
}

/// Fits FPCA on the training functions via the Gram route.
pub fn fit_fpca(training: &[GridFunction], var_frac: f64) -> Result<FpcModel> {
    let route = match training.first() {
        Some(f) if training.len() > f.len() => EigenRoute::Covariance,
        _ => EigenRoute::Gram,
    };
    fit_fpca_with(training, var_frac, route)
}

/// Fits FPCA using the chosen eigen route.
pub fn fit_fpca_with(training: &[GridFunction], var_frac: f64, route: EigenRoute) -> Result<FpcModel> {
    if training.len() < MIN_TRAINING {
        return Err(Error::InsufficientData(format!(
            "fpca needs at least {MIN_TRAINING} training functions, got {}",
            training.len()
        )));
    }
    if !(var_frac > 0.0 && var_frac <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance fraction must lie in (0, 1], got {var_frac}"
        )));
    }
    let g = training[0].len();
    for f in training {
        if f.len() != g {
            return Err(Error::GridMismatch {
                expected: g,
                got: f.len(),
            });
        }
    }
    let n = training.len();
    let nf = n as f64;

    let mut mean = vec![0.0; g];
    for f in training {
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let w = trapezoid_weights(g);
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    // rows: centered functions scaled by √w
    let y = DMatrix::from_fn(n, g, |i, k| (training[i].values()[k] - mean[k]) * sqrt_w[k]);

    let total: f64 = y.iter().map(|v| v * v).sum::<f64>() / nf;
    if total < MIN_TOTAL_VARIANCE {
        return Err(Error::DegenerateTraining(total));
    }

    // (eigenvalue, ψ) pairs with ψ orthonormal in the Euclidean sense
    let mut pairs: Vec<(f64, Vec<f64>)> = match route {
        EigenRoute::Gram => {
            let gram = (&y * y.transpose()) / nf;
            let eig = SymmetricEigen::new(gram);
            (0..n)
                .map(|l| {
                    let rho = eig.eigenvalues[l];
                    let u = eig.eigenvectors.column(l);
                    let psi = if rho > 0.0 {
                        let s = 1.0 / (nf * rho).sqrt();
                        (y.transpose() * u).iter().map(|v| v * s).collect()
                    } else {
                        vec![0.0; g]
                    };
                    (rho, psi)
                })
                .collect()
        }
        EigenRoute::Covariance => {
            let cov = (y.transpose() * &y) / nf;
            let eig = SymmetricEigen::new(cov);
            (0..g)
                .map(|l| (eig.eigenvalues[l], eig.eigenvectors.column(l).iter().copied().collect()))
                .collect()
        }
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let rho1 = pairs[0].0;
    let floor = EIGEN_FLOOR_REL * rho1;
    pairs.retain(|(rho, _)| *rho > floor && *rho > 0.0);
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let kept_total: f64 = eigenvalues.iter().sum();

    let mut retained = eigenvalues.len();
    let mut acc = 0.0;
    for (l, rho) in eigenvalues.iter().enumerate() {
        acc += rho;
        if acc / kept_total >= var_frac {
            retained = l + 1;
            break;
        }
    }

    let eigenfunctions = pairs
        .into_iter()
        .take(retained)
        .map(|(_, psi)| {
            let mut phi: Vec<f64> = psi.iter().zip(&sqrt_w).map(|(p, s)| p / s).collect();
            fix_sign(&mut phi);
            GridFunction::from_vec_unchecked(phi)
        })
        .collect();

    Ok(FpcModel {
        grid_size: g,
        mean_fn: GridFunction::from_vec_unchecked(mean),
        eigenfunctions,
        eigenvalues,
        retained,
        var_frac,
        reference_cdf: None,
        n_training: n,
    })
}

/// Makes `∫φ ≥ 0`; near-zero integrals fall back to the first nonzero value.
fn fix_sign(phi: &mut [f64]) {
    let integral = crate::grid::trapezoid(phi);
    let flip = if integral.abs() > 1e-9 {
        integral < 0.0
    } else {
        phi.iter().find(|v| v.abs() > 0.0).is_some_and(|v| *v < 0.0)
    };
    if flip {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
}

impl FpcModel {
    pub fn with_reference(mut self, reference: CdfOnGrid) -> Self {
        self.reference_cdf = Some(reference);
        self
    }

    fn check_grid(&self, v: &GridFunction) -> Result<()> {
        if v.len() != self.grid_size {
            return Err(Error::GridMismatch {
                expected: self.grid_size,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn centered(&self, v: &GridFunction) -> Result<Vec<f64>> {
        self.check_grid(v)?;
        Ok(v.values()
            .iter()
            .zip(self.mean_fn.values())
            .map(|(a, m)| a - m)
            .collect())
    }

    /// FPC scores `β_l = ∫(v − mean)φ_l` for the retained components.
    pub fn scores(&self, v: &GridFunction) -> Result<Vec<f64>> {
        let c = self.centered(v)?;
        Ok(self
            .eigenfunctions
            .iter()
            .map(|phi| inner_product(&c, phi.values()))
            .collect())
    }

    /// Hotelling T² within the retained subspace.
    pub fn t2_statistic(&self, v: &GridFunction) -> Result<f64> {
        Ok(self
            .scores(v)?
            .iter()
            .zip(&self.eigenvalues)
            .map(|(b, rho)| b * b / rho)
            .sum())
    }

    /// Squared L² residual after projecting onto the retained subspace.
    pub fn spe_statistic(&self, v: &GridFunction) -> Result<f64> {
        let mut resid = self.centered(v)?;
        for phi in &self.eigenfunctions {
            let beta = inner_product(&resid, phi.values());
            for (r, p) in resid.iter_mut().zip(phi.values()) {
                *r -= beta * p;
            }
        }
        Ok(inner_product(&resid, &resid).max(0.0))
    }

    /// Both monitoring features.
    pub fn features(&self, v: &GridFunction, index: usize) -> Result<FeaturePair> {
        let scores = self.scores(v)?;
        let t2 = scores
            .iter()
            .zip(&self.eigenvalues)
            .map(|(b, rho)| b * b / rho)
            .sum();
        let c = self.centered(v)?;
        let mut resid = c;
        for (phi, b) in self.eigenfunctions.iter().zip(&scores) {
            for (r, p) in resid.iter_mut().zip(phi.values()) {
                *r -= b * p;
            }
        }
        let spe = inner_product(&resid, &resid).max(0.0);
        Ok(FeaturePair { t2, spe, index })
    }

    /// Share of the non-null variance captured by the retained components.
    pub fn explained_fraction(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.retained].iter().sum::<f64>() / total
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a persisted model.
    pub fn from_json(s: &str) -> Result<Self> {
        let model: FpcModel = serde_json::from_str(s)?;
        if model.mean_fn.len() != model.grid_size
            || model.eigenfunctions.iter().any(|f| f.len() != model.grid_size)
        {
            return Err(Error::Parse("model grid sizes disagree".into()));
        }
        if model.retained == 0
            || model.retained != model.eigenfunctions.len()
            || model.retained > model.eigenvalues.len()
        {
            return Err(Error::Parse("retained component count is inconsistent".into()));
        }
        if model.eigenvalues.iter().any(|r| !(*r > 0.0))
            || model.eigenvalues.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::Parse("eigenvalues must be positive and nonincreasing".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::grid_points;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const G: usize = 128;

    fn planted(n: usize, seed: u64) -> Vec<GridFunction> {
        let x = grid_points(G);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0) * 3.0;
                let b: f64 = rng.random_range(-1.0..1.0);
                GridFunction::new(
                    x.iter()
                        .map(|t| 0.3 * t + a * (2.0 * PI * t).sin() + b * (4.0 * PI * t).cos())
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    fn noisy(n: usize, seed: u64) -> Vec<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| GridFunction::new((0..G).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect()
    }

    #[test]
    fn planted_subspace_recovers_two() {
        let m = fit_fpca(&planted(40, 3), 0.99).unwrap();
        assert_eq!(m.retained, 2);
        assert!(m.explained_fraction() >= 0.99);
    }

    #[test]
    fn identical_training_is_degenerate() {
        let f = GridFunction::constant(G, 0.3).unwrap();
        assert!(matches!(
            fit_fpca(&vec![f; 10], 0.99),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn too_few_training() {
        assert!(matches!(fit_fpca(&noisy(4, 1), 0.99), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn orthonormal_eigenfunctions() {
        let m = fit_fpca(&noisy(30, 7), 0.99).unwrap();
        for (l, a) in m.eigenfunctions.iter().enumerate() {
            for (k, b) in m.eigenfunctions.iter().enumerate() {
                let ip = a.inner(b).unwrap();
                let expect = if l == k { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-6, "<φ{l},φ{k}> = {ip}");
            }
        }
        assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for phi in &m.eigenfunctions {
            assert!(phi.integral() >= -1e-9);
        }
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        let data = noisy(20, 9);
        let a = fit_fpca_with(&data, 0.9, EigenRoute::Gram).unwrap();
        let b = fit_fpca_with(&data, 0.9, EigenRoute::Covariance).unwrap();
        assert_eq!(a.retained, b.retained);
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues).take(a.retained) {
            assert!((x - y).abs() < 1e-10 * x.max(1.0));
        }
        for (x, y) in a.eigenfunctions.iter().zip(&b.eigenfunctions) {
            assert!(x.sup_distance(y).unwrap() < 1e-6);
        }
    }

    #[test]
    fn scores_of_mean_and_axis() {
        let m = fit_fpca(&planted(30, 5), 0.99).unwrap();
        let s = m.scores(&m.mean_fn).unwrap();
        assert!(s.iter().all(|b| b.abs() < 1e-12));
        assert_eq!(m.t2_statistic(&m.mean_fn).unwrap(), 0.0);

        let c = 0.7;
        let v = GridFunction::new(
            m.mean_fn
                .values()
                .iter()
                .zip(m.eigenfunctions[0].values())
                .map(|(a, p)| a + c * p)
                .collect(),
        )
        .unwrap();
        let s = m.scores(&v).unwrap();
        assert!((s[0] - c).abs() < 1e-6);
        assert!(s[1..].iter().all(|b| b.abs() < 1e-6));
        assert!(m.spe_statistic(&v).unwrap() < 1e-10);

        let step = m.eigenvalues[0].sqrt();
        let v = GridFunction::new(
            m.mean_fn
                .values()
                .iter()
                .zip(m.eigenfunctions[0].values())
                .map(|(a, p)| a + step * p)
                .collect(),
        )
        .unwrap();
        assert!((m.t2_statistic(&v).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn training_t2_mean_is_retained_count() {
        let data = noisy(40, 13);
        let m = fit_fpca(&data, 0.99).unwrap();
        let mean_t2: f64 =
            data.iter().map(|v| m.t2_statistic(v).unwrap()).sum::<f64>() / data.len() as f64;
        let l = m.retained as f64;
        assert!((mean_t2 - l).abs() <= 0.3 * l, "mean T² {mean_t2} vs L {l}");
    }

    #[test]
    fn spe_matches_direct_residual_integral() {
        let m = fit_fpca(&noisy(25, 17), 0.8).unwrap();
        let v = &noisy(1, 99)[0];
        let beta = m.scores(v).unwrap();
        let recon: Vec<f64> = (0..G)
            .map(|k| {
                m.mean_fn.values()[k]
                    + beta
                        .iter()
                        .zip(&m.eigenfunctions)
                        .map(|(b, p)| b * p.values()[k])
                        .sum::<f64>()
            })
            .collect();
        let resid: Vec<f64> = v.values().iter().zip(&recon).map(|(a, r)| (a - r).powi(2)).collect();
        let direct = crate::grid::trapezoid(&resid);
        assert!((m.spe_statistic(v).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn permutation_invariance() {
        let data = noisy(15, 21);
        let mut rev = data.clone();
        rev.reverse();
        let a = fit_fpca(&data, 0.95).unwrap();
        let b = fit_fpca(&rev, 0.95).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in a.eigenfunctions.iter().zip(&b.eigenfunctions) {
            let same = x.sup_distance(y).unwrap();
            let neg = GridFunction::new(y.values().iter().map(|v| -v).collect()).unwrap();
            assert!(same < 1e-6 || x.sup_distance(&neg).unwrap() < 1e-6);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let m = fit_fpca(&noisy(12, 2), 0.9).unwrap();
        let back = FpcModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn grid_mismatch_on_scoring() {
        let m = fit_fpca(&noisy(12, 2), 0.9).unwrap();
        let v = GridFunction::constant(G + 1, 0.0).unwrap();
        assert!(matches!(m.scores(&v), Err(Error::GridMismatch { .. })));
    }

    proptest! {
        #[test]
        fn parseval_at_truncation(seed in 0u64..1000, frac in 0.5f64..0.99) {
            let m = fit_fpca(&noisy(12, 4), frac).unwrap();
            let v = &noisy(1, seed + 10_000)[0];
            let b = m.scores(v).unwrap();
            let spe = m.spe_statistic(v).unwrap();
            let c: Vec<f64> = v.values().iter().zip(m.mean_fn.values()).map(|(a, mu)| a - mu).collect();
            let norm2 = inner_product(&c, &c);
            prop_assert!((b.iter().map(|x| x * x).sum::<f64>() + spe - norm2).abs() < 1e-6);
        }
    }
}
