//! Distribution summary: turns a raw scalar feature stream into a sequence of
//! densities on `[0, 1]`.
//!
//! The steps are subgrouping, boxplot outlier filtering of the training
//! portion, support estimation with widening, affine scaling to the unit
//! interval, boundary-corrected Gaussian KDE per subgroup and finally mixing
//! with the uniform density so that every CDF downstream is strictly
//! increasing.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, DEFAULT_GRID_SIZE};
use crate::stats;

/// Default boxplot fence multiplier.
pub const DEFAULT_FENCE_K: f64 = 1.5;
/// Default support widening factor.
pub const DEFAULT_THETA_WIDEN: f64 = 0.4;
/// Default uniform mixing coefficient.
pub const DEFAULT_ALPHA_MIX: f64 = 0.1;
/// Smallest bandwidth the KDE will use.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

const PDF_INTEGRAL_TOL: f64 = 1e-8;

/// Raw damage-sensitive feature samples, optionally time-stamped.
#[derive(Debug, Clone, PartialEq)]
pub struct DsfSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<NaiveDateTime>>,
}

impl DsfSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty series".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at position {i}"
            )));
        }
        Ok(Self {
            values,
            timestamps: None,
        })
    }

    /// Series with one timestamp per value; timestamps must be nondecreasing.
    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<NaiveDateTime>) -> Result<Self> {
        if values.len() != timestamps.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values but {} timestamps",
                values.len(),
                timestamps.len()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "timestamps must be monotone".into(),
            ));
        }
        let mut s = Self::new(values)?;
        s.timestamps = Some(timestamps);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[NaiveDateTime]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One block of consecutive samples; `index` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgroup {
    pub index: usize,
    pub values: Vec<f64>,
}

/// Splits the series into consecutive blocks of `m` samples, dropping the
/// trailing remainder.
pub fn partition_equal(series: &DsfSeries, m: usize) -> Result<Vec<Subgroup>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "subgroup size must be at least 2, got {m}"
        )));
    }
    if series.len() < m {
        return Err(Error::InsufficientData(format!(
            "series of length {} shorter than subgroup size {m}",
            series.len()
        )));
    }
    Ok(series
        .values
        .chunks_exact(m)
        .enumerate()
        .map(|(j, chunk)| Subgroup {
            index: j + 1,
            values: chunk.to_vec(),
        })
        .collect())
}

/// Splits a time-stamped series into calendar-day blocks. Days with fewer
/// than two samples are skipped.
pub fn partition_daily(series: &DsfSeries) -> Result<Vec<Subgroup>> {
    let ts = series.timestamps().ok_or_else(|| {
        Error::InvalidParameter("daily subgrouping needs timestamps".into())
    })?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < ts.len() {
        let day = ts[start].date();
        let mut end = start;
        while end < ts.len() && ts[end].date() == day {
            end += 1;
        }
        if end - start >= 2 {
            out.push(Subgroup {
                index: out.len() + 1,
                values: series.values[start..end].to_vec(),
            });
        }
        start = end;
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(
            "no day holds at least two samples".into(),
        ));
    }
    Ok(out)
}

/// Keeps the values inside `[Q1 - k·IQR, Q3 + k·IQR]`, preserving order.
/// A zero IQR returns the input unchanged.
pub fn boxplot_filter(values: &[f64], k: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InsufficientData("boxplot filter on empty input".into()));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("fence multiplier must be > 0, got {k}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    if iqr <= 0.0 {
        return Ok(values.to_vec());
    }
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    Ok(values.iter().copied().filter(|v| *v >= lo && *v <= hi).collect())
}

/// Estimated support `[lb_star, ub_star]` of the feature distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub lb_star: f64,
    pub ub_star: f64,
    pub theta_widen: f64,
}

impl SupportInterval {
    pub fn new(lb_star: f64, ub_star: f64, theta_widen: f64) -> Result<Self> {
        if !(lb_star < ub_star) || !lb_star.is_finite() || !ub_star.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "support needs lb < ub, got [{lb_star}, {ub_star}]"
            )));
        }
        Ok(Self {
            lb_star,
            ub_star,
            theta_widen,
        })
    }

    pub fn width(&self) -> f64 {
        self.ub_star - self.lb_star
    }
}

/// Support from (already outlier-filtered) training data:
/// `[min - s/√N, max + s/√N]`, then widened by `theta_widen` times its
/// width on each side.
pub fn estimate_support(training: &[f64], theta_widen: f64) -> Result<SupportInterval> {
    if training.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "support estimation needs at least 2 values, got {}",
            training.len()
        )));
    }
    if !(0.0..=1.0).contains(&theta_widen) {
        return Err(Error::InvalidParameter(format!(
            "widening factor must lie in [0, 1], got {theta_widen}"
        )));
    }
    let s = stats::sample_std(training);
    if !(s > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    let pad = s / (training.len() as f64).sqrt();
    let min = training.iter().copied().fold(f64::INFINITY, f64::min);
    let max = training.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lb = min - pad;
    let ub = max + pad;
    let widen = theta_widen * (ub - lb);
    SupportInterval::new(lb - widen, ub + widen, theta_widen)
}

/// Values mapped into `[0, 1]` together with the number that had to be clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledValues {
    pub values: Vec<f64>,
    pub clamped: usize,
}

/// Affine map of `support` onto `[0, 1]`; out-of-support values are clamped.
pub fn scale_to_unit(values: &[f64], support: &SupportInterval) -> ScaledValues {
    let width = support.width();
    let mut clamped = 0;
    let values = values
        .iter()
        .map(|z| {
            let t = (z - support.lb_star) / width;
            if !(0.0..=1.0).contains(&t) {
                clamped += 1;
            }
            t.clamp(0.0, 1.0)
        })
        .collect();
    ScaledValues { values, clamped }
}

/// Density sampled on the uniform grid over `[0, 1]`: nonnegative with unit
/// trapezoidal integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PdfOnGrid(GridFunction);

impl PdfOnGrid {
    /// Validates nonnegativity and unit mass (within `1e-8`).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let f = GridFunction::new(values)?;
        if let Some(i) = f.values().iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "density value at grid point {i} is negative or not finite"
            )));
        }
        let mass = f.integral();
        if (mass - 1.0).abs() > PDF_INTEGRAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        Ok(Self(f))
    }

    /// Rescales nonnegative values to unit trapezoidal mass.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let f = GridFunction::new(values)?;
        if f.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let mass = f.integral();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("density has zero mass".into()));
        }
        Ok(Self(GridFunction::from_vec_unchecked(
            f.into_values().into_iter().map(|v| v / mass).collect(),
        )))
    }

    pub fn uniform(grid_size: usize) -> Result<Self> {
        Self::new(vec![1.0; grid_size])
    }

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

/// Normal-reference bandwidth `0.9·min(s, IQR/1.34)·n^(-1/5)`, floored at
/// [`BANDWIDTH_FLOOR`]. The flag reports whether the floor was used.
pub fn silverman_bandwidth(values: &[f64]) -> (f64, bool) {
    let n = values.len() as f64;
    let s = stats::sample_std(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let h = 0.9 * s.min(iqr / 1.34) * n.powf(-0.2);
    if h.is_finite() && h >= BANDWIDTH_FLOOR {
        (h, false)
    } else {
        (BANDWIDTH_FLOOR, true)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Result of [`kde_unit_detailed`].
#[derive(Debug, Clone)]
pub struct KdeEstimate {
    pub pdf: PdfOnGrid,
    pub bandwidth: f64,
    pub bandwidth_floored: bool,
}

/// Boundary-corrected Gaussian KDE of data in `[0, 1]`.
pub fn kde_unit(values: &[f64], grid_size: usize) -> Result<PdfOnGrid> {
    kde_unit_detailed(values, grid_size).map(|k| k.pdf)
}

/// Like [`kde_unit`] but also reports the bandwidth used.
///
/// The estimate at each grid point `x` is divided by the kernel mass that
/// falls inside `[0, 1]` when centred at `x`, then the whole curve is
/// rescaled to unit trapezoidal mass.
pub fn kde_unit_detailed(values: &[f64], grid_size: usize) -> Result<KdeEstimate> {
    if values.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "kde needs at least 5 points, got {}",
            values.len()
        )));
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid size must be at least 2".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("kde input must be finite".into()));
    }
    let (h, floored) = silverman_bandwidth(values);
    let g = grid_size - 1;
    let inv_step = g as f64;
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let reach = 8.0 * h;
    let mut dens = vec![0.0; grid_size];
    for &xi in values {
        let lo = (((xi - reach) * inv_step).floor().max(0.0)) as usize;
        let hi = (((xi + reach) * inv_step).ceil().min(g as f64)) as usize;
        for (k, d) in dens.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let u = (k as f64 / inv_step - xi) / h;
            *d += (-0.5 * u * u).exp();
        }
    }
    for (k, d) in dens.iter_mut().enumerate() {
        let x = k as f64 / inv_step;
        let mass = std_normal_cdf((1.0 - x) / h) - std_normal_cdf(-x / h);
        *d *= norm / mass;
    }
    let pdf = PdfOnGrid::normalized(dens)?;
    Ok(KdeEstimate {
        pdf,
        bandwidth: h,
        bandwidth_floored: floored,
    })
}

/// `(1 - alpha)·f + alpha·1`.
pub fn mix_with_uniform(f: &PdfOnGrid, alpha_mix: f64) -> Result<PdfOnGrid> {
    if !(0.0..1.0).contains(&alpha_mix) {
        return Err(Error::InvalidParameter(format!(
            "mixing coefficient must lie in [0, 1), got {alpha_mix}"
        )));
    }
    let vals = f
        .values()
        .iter()
        .map(|v| (1.0 - alpha_mix) * v + alpha_mix)
        .collect();
    Ok(PdfOnGrid(GridFunction::from_vec_unchecked(vals)))
}

/// How raw samples are split into subgroups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgrouping {
    Equal(usize),
    Daily,
}

/// Settings for [`summarize_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    pub subgrouping: Subgrouping,
    /// Leading subgroups whose samples form the support-estimation set.
    pub n_training: usize,
    pub theta_widen: f64,
    pub fence_k: f64,
    pub grid_size: usize,
}

impl SummaryConfig {
    pub fn equal(subgroup_size: usize, n_training: usize) -> Self {
        Self {
            subgrouping: Subgrouping::Equal(subgroup_size),
            n_training,
            theta_widen: DEFAULT_THETA_WIDEN,
            fence_k: DEFAULT_FENCE_K,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

/// Densities of every subgroup plus preprocessing diagnostics.
#[derive(Debug, Clone)]
pub struct DistributionSummary {
    pub pdfs: Vec<PdfOnGrid>,
    pub support: SupportInterval,
    pub clamp_count: usize,
    pub degenerate_subgroup_count: usize,
}

/// Full preprocessing chain from raw samples to per-subgroup densities.
///
/// The samples of the first `n_training` subgroups are boxplot-filtered and
/// used to estimate the support; every sample is then scaled into `[0, 1]`
/// and each subgroup gets its own boundary-corrected KDE.
pub fn summarize_series(series: &DsfSeries, cfg: &SummaryConfig) -> Result<DistributionSummary> {
    let groups = match cfg.subgrouping {
        Subgrouping::Equal(m) => partition_equal(series, m)?,
        Subgrouping::Daily => partition_daily(series)?,
    };
    if cfg.n_training == 0 || groups.len() < cfg.n_training {
        return Err(Error::InsufficientData(format!(
            "{} subgroups available, {} needed for support estimation",
            groups.len(),
            cfg.n_training
        )));
    }
    let training: Vec<f64> = groups[..cfg.n_training]
        .iter()
        .flat_map(|g| g.values.iter().copied())
        .collect();
    let filtered = boxplot_filter(&training, cfg.fence_k)?;
    let support = estimate_support(&filtered, cfg.theta_widen)?;

    let mut clamp_count = 0;
    let mut degenerate = 0;
    let mut pdfs = Vec::with_capacity(groups.len());
    for g in &groups {
        let scaled = scale_to_unit(&g.values, &support);
        clamp_count += scaled.clamped;
        let est = kde_unit_detailed(&scaled.values, cfg.grid_size)?;
        if est.bandwidth_floored {
            degenerate += 1;
        }
        pdfs.push(est.pdf);
    }
    Ok(DistributionSummary {
        pdfs,
        support,
        clamp_count,
        degenerate_subgroup_count: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_examples() {
        let s = DsfSeries::new(vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let g = partition_equal(&s, 3).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].values, vec![1., 2., 3.]);
        assert_eq!(g[1].values, vec![4., 5., 6.]);
        assert_eq!(g[1].index, 2);

        let s = DsfSeries::new(vec![1., 2., 3., 4., 5.]).unwrap();
        let g = partition_equal(&s, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[1].values, vec![3., 4.]);
    }

    #[test]
    fn partition_errors() {
        let s = DsfSeries::new(vec![1., 2., 3.]).unwrap();
        assert!(matches!(partition_equal(&s, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(partition_equal(&s, 4), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(DsfSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(DsfSeries::new(vec![]).is_err());
    }

    #[test]
    fn daily_partition_groups_by_date() {
        let t = |d: u32, h: u32| {
            chrono::NaiveDate::from_ymd_opt(2024, 1, d)
                .unwrap()
                .and_hms_opt(h, 0, 0)
                .unwrap()
        };
        let s = DsfSeries::with_timestamps(
            vec![1., 2., 3., 4., 5., 6.],
            vec![t(1, 0), t(1, 5), t(1, 9), t(2, 1), t(3, 2), t(3, 4)],
        )
        .unwrap();
        let g = partition_daily(&s).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].values, vec![1., 2., 3.]);
        assert_eq!(g[1].values, vec![5., 6.]);
    }

    #[test]
    fn boxplot_examples() {
        assert_eq!(boxplot_filter(&[1., 2., 3., 100.], 1.5).unwrap(), vec![1., 2., 3.]);
        assert_eq!(boxplot_filter(&[5., 5., 5., 5.], 1.5).unwrap(), vec![5.; 4]);
        // fences reach 0.2 and 0.6 once k >= 0.5; smaller k drops the ends
        for k in [1.0, 1.5, 3.0] {
            assert_eq!(
                boxplot_filter(&[0.2, 0.4, 0.6], k).unwrap(),
                vec![0.2, 0.4, 0.6]
            );
        }
        assert_eq!(boxplot_filter(&[0.2, 0.4, 0.6], 0.1).unwrap(), vec![0.4]);
    }

    #[test]
    fn support_example() {
        let s = estimate_support(&[0.2, 0.4, 0.6], 0.4).unwrap();
        // s = 0.2, s/sqrt(3) = 0.11547; LB = 0.08453, UB = 0.71547, width 0.63094
        let pad = 0.2 / 3f64.sqrt();
        let (lb, ub) = (0.2 - pad, 0.6 + pad);
        assert!((s.lb_star - (lb - 0.4 * (ub - lb))).abs() < 1e-15);
        assert!((s.lb_star - (-0.16785)).abs() < 1e-5);
        assert!((s.ub_star - 0.96785).abs() < 1e-5);

        let s0 = estimate_support(&[0.2, 0.4, 0.6], 0.0).unwrap();
        assert!((s0.lb_star - lb).abs() < 1e-15);
        assert!((s0.ub_star - ub).abs() < 1e-15);
    }

    #[test]
    fn support_symmetric_about_midpoint() {
        let s = estimate_support(&[-3.0, -1.0, 0.0, 1.0, 3.0], 0.4).unwrap();
        assert!((s.lb_star + s.ub_star).abs() < 1e-12);
    }

    #[test]
    fn support_degenerate() {
        assert!(matches!(
            estimate_support(&[1.0, 1.0, 1.0], 0.4),
            Err(Error::DegenerateSupport)
        ));
    }

    #[test]
    fn scale_examples() {
        let s = estimate_support(&[0.2, 0.4, 0.6], 0.4).unwrap();
        let out = scale_to_unit(&[s.lb_star, s.ub_star, 0.5 * (s.lb_star + s.ub_star)], &s);
        assert_eq!(out.values[0], 0.0);
        assert_eq!(out.values[1], 1.0);
        assert!((out.values[2] - 0.5).abs() < 1e-15);
        assert_eq!(out.clamped, 0);

        let out = scale_to_unit(&[0.2, 0.4, 0.6], &s);
        assert!((out.values[0] - 0.3239).abs() < 1e-4);
        assert!((out.values[1] - 0.5).abs() < 1e-12);
        assert!((out.values[2] - 0.6761).abs() < 1e-4);

        let out = scale_to_unit(&[-5.0, 5.0], &s);
        assert_eq!(out.values, vec![0.0, 1.0]);
        assert_eq!(out.clamped, 2);
    }

    #[test]
    fn kde_uniform_sup_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let f = kde_unit(&xs, 512).unwrap();
        let sup = f.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(sup <= 0.05, "sup distance {sup}");
    }

    #[test]
    fn kde_degenerate_input() {
        let est = kde_unit_detailed(&[0.5; 20], 512).unwrap();
        assert!(est.bandwidth_floored);
        assert_eq!(est.bandwidth, BANDWIDTH_FLOOR);
        let v = est.pdf.values();
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        assert!((imax as f64 / 511.0 - 0.5).abs() <= 1.0 / 511.0);
        assert!((est.pdf.as_grid().integral() - 1.0).abs() < 1e-8);
        // unimodal: nondecreasing up to the peak, nonincreasing after
        assert!(v[..=imax].windows(2).all(|w| w[1] >= w[0]));
        assert!(v[imax..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn kde_too_few_points() {
        assert!(matches!(
            kde_unit(&[0.1, 0.2, 0.3, 0.4], 64),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn mix_examples() {
        let u = PdfOnGrid::uniform(64).unwrap();
        let m = mix_with_uniform(&u, 0.1).unwrap();
        assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let f = PdfOnGrid::normalized(crate::grid::grid_points(64).iter().map(|x| 2.0 * x).collect()).unwrap();
        assert_eq!(mix_with_uniform(&f, 0.0).unwrap(), f);
        let m = mix_with_uniform(&f, 0.1).unwrap();
        assert!((m.values()[0] - 0.1).abs() < 1e-15);

        assert!(mix_with_uniform(&f, 1.0).is_err());
        assert!(mix_with_uniform(&f, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn scale_is_order_preserving(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let s = SupportInterval::new(-2.0, 3.0, 0.4).unwrap();
            let out = scale_to_unit(&[a.min(b), a.max(b)], &s);
            prop_assert!(out.values[0] <= out.values[1]);
        }

        #[test]
        fn partition_is_prefix(len in 2usize..200, m in 2usize..20) {
            let vals: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let s = DsfSeries::new(vals.clone()).unwrap();
            if let Ok(groups) = partition_equal(&s, m) {
                let flat: Vec<f64> = groups.iter().flat_map(|g| g.values.clone()).collect();
                prop_assert_eq!(flat.len(), (len / m) * m);
                prop_assert_eq!(&flat[..], &vals[..flat.len()]);
            } else {
                prop_assert!(len < m);
            }
        }

        #[test]
        fn kde_and_mix_are_valid_densities(
            xs in proptest::collection::vec(0.0f64..=1.0, 5..60),
            alpha in 0.0f64..0.99,
        ) {
            let f = kde_unit(&xs, 128).unwrap();
            prop_assert!((f.as_grid().integral() - 1.0).abs() < 1e-8);
            prop_assert!(f.values().iter().all(|v| *v >= 0.0));
            let m = mix_with_uniform(&f, alpha).unwrap();
            prop_assert!((m.as_grid().integral() - 1.0).abs() < 1e-8);
            prop_assert!(m.values().iter().all(|v| *v >= alpha - 1e-15));
        }
    }
}
