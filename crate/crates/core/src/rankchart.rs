//! Rank-based nonparametric change-point control chart.
//!
//! The monitored feature stream is split into `m` tuning values followed by
//! `n` future values. After each new value every split position `j` gets a
//! standardized Mann–Whitney statistic comparing the first `j` values with
//! the rest; these are smoothed across `j` by a weighted moving average and
//! the largest absolute smoothed value (the Y-max statistic) is compared to
//! the control limit. Because only ranks enter, the in-control behaviour is
//! the same for every continuous feature distribution, which is what makes
//! Monte-Carlo calibration on uniform draws valid.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calibration table produced by `warpchart calibrate`, shipped with the crate.
pub const SHIPPED_CALIBRATION: &str = include_str!("../data/calibration.csv");

/// Chart tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankChartConfig {
    /// Tuning length.
    pub m: usize,
    /// Number of tuning positions included in the moving average.
    pub m0: usize,
    /// Smoothing weight of the moving average.
    pub lambda: f64,
    pub control_limit: f64,
    pub ic_arl: f64,
}

impl Default for RankChartConfig {
    fn default() -> Self {
        Self {
            m: 30,
            m0: 4,
            lambda: 0.05,
            control_limit: f64::INFINITY,
            ic_arl: 500.0,
        }
    }
}

impl RankChartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(4..=10).contains(&self.m0) {
            return Err(Error::InvalidParameter(format!(
                "m0 must lie in [4, 10], got {}",
                self.m0
            )));
        }
        if self.m <= self.m0 {
            return Err(Error::InvalidParameter(format!(
                "tuning length m = {} must exceed m0 = {}",
                self.m, self.m0
            )));
        }
        if !(self.control_limit >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "control limit must be nonnegative, got {}",
                self.control_limit
            )));
        }
        Ok(())
    }
}

/// Rank of each value: number of values not larger than it (ties share the
/// largest count).
pub fn ranks(data: &[f64]) -> Vec<usize> {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
    let mut out = vec![0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && data[order[j + 1]] == data[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            out[idx] = j + 1;
        }
        i = j + 1;
    }
    out
}

/// Average ranks plus the tie-correction factor
/// `1 − Σω(ω²−1) / (N(N²−1))`.
pub fn midranks(data: &[f64]) -> (Vec<f64>, f64) {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
    let mut out = vec![0.0; n];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && data[order[j + 1]] == data[order[i]] {
            j += 1;
        }
        let avg = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        let w = (j - i + 1) as f64;
        tie_sum += w * (w * w - 1.0);
        i = j + 1;
    }
    let nf = n as f64;
    let c_tie = if n > 1 {
        1.0 - tie_sum / (nf * (nf * nf - 1.0))
    } else {
        1.0
    };
    (out, c_tie)
}

/// Standardized statistic from the rank sum `w` of the first `j` of `n` values.
#[inline]
fn standardize(w: f64, j: usize, n: usize, c_tie: f64) -> f64 {
    let (jf, nf) = (j as f64, n as f64);
    let mw = w - jf * (jf + 1.0) / 2.0;
    let e0 = jf * (nf - jf) / 2.0;
    let var0 = c_tie * jf * (nf - jf) * (nf + 1.0) / 12.0;
    if var0 > 0.0 {
        (mw - e0) / var0.sqrt()
    } else {
        0.0
    }
}

/// Standardized Mann–Whitney statistic for the split after position `j`
/// (1-based, `1 ≤ j < N`). Ties get average ranks; an all-tied sample gives 0.
pub fn smw(data: &[f64], j: usize) -> Result<f64> {
    let n = data.len();
    if j == 0 || j >= n {
        return Err(Error::OutOfRange { index: j, len: n });
    }
    let (r, c_tie) = midranks(data);
    let w: f64 = r[..j].iter().sum();
    Ok(standardize(w, j, n, c_tie))
}

/// Y-max statistic and the SMW profile at the current stream length.
#[derive(Debug, Clone, PartialEq)]
pub struct YmaxScan {
    pub ymax: f64,
    /// `smw[i]` is the statistic for split `j = j_start + i`.
    pub smw: Vec<f64>,
    pub j_start: usize,
}

/// Core scan shared by the chart and the calibrator: SMW for every split
/// `j ∈ [j_start, N−1]`, the moving average started from 0, and its
/// largest absolute value.
fn scan_ranks(ranks: &[f64], c_tie: f64, j_start: usize, lambda: f64, keep_smw: bool) -> (f64, Vec<f64>) {
    let n = ranks.len();
    let mut w: f64 = ranks[..j_start - 1].iter().sum();
    let mut y = 0.0f64;
    let mut ymax = 0.0f64;
    let mut profile = Vec::with_capacity(if keep_smw { n - j_start } else { 0 });
    for j in j_start..n {
        w += ranks[j - 1];
        let s = standardize(w, j, n, c_tie);
        y = lambda * s + (1.0 - lambda) * y;
        ymax = ymax.max(y.abs());
        if keep_smw {
            profile.push(s);
        }
    }
    (ymax, profile)
}

/// Y-max over the whole observed stream (tuning values first).
pub fn ymax_scan(data: &[f64], m: usize, m0: usize, lambda: f64) -> Result<YmaxScan> {
    if m <= m0 || data.len() <= m {
        return Err(Error::InsufficientData(format!(
            "need more than m = {m} values (m0 = {m0}), got {}",
            data.len()
        )));
    }
    let (r, c_tie) = midranks(data);
    let j_start = m - m0;
    let (ymax, smw) = scan_ranks(&r, c_tie, j_start, lambda, true);
    Ok(YmaxScan { ymax, smw, j_start })
}

/// First alarm of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    /// Number of future values seen when the alarm fired.
    pub n_at_alarm: usize,
    pub ymax: f64,
    /// Estimated split position within the monitored stream.
    pub change_point_local: usize,
    /// Same, shifted by the training length.
    pub change_point_global: usize,
}

/// One plotted chart point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub n: usize,
    pub ymax: f64,
    pub control_limit: f64,
    pub alarmed: bool,
}

/// Streaming state of one rank chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartState {
    pub config: RankChartConfig,
    /// Offset added to local change points (training length).
    pub offset: usize,
    pub observed: Vec<f64>,
    pub n_future: usize,
    pub ymax_history: Vec<(usize, f64)>,
    pub alarm: Option<AlarmEvent>,
}

impl ChartState {
    pub fn new(config: RankChartConfig, offset: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            offset,
            observed: Vec::new(),
            n_future: 0,
            ymax_history: Vec::new(),
            alarm: None,
        })
    }

    pub fn in_tuning(&self) -> bool {
        self.observed.len() < self.config.m
    }

    pub fn alarmed(&self) -> bool {
        self.alarm.is_some()
    }

    /// Ingests one feature value. Returns `None` while the tuning window is
    /// filling, otherwise the new chart point. The first alarm is latched.
    pub fn push(&mut self, value: f64) -> Result<Option<ChartPoint>> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite feature {value}")));
        }
        self.observed.push(value);
        if self.observed.len() <= self.config.m {
            return Ok(None);
        }
        self.n_future += 1;
        let cfg = self.config;
        let scan = ymax_scan(&self.observed, cfg.m, cfg.m0, cfg.lambda)?;
        self.ymax_history.push((self.n_future, scan.ymax));
        let exceeded = scan.ymax > cfg.control_limit;
        if exceeded && self.alarm.is_none() {
            let local = argmax_change(&scan, cfg.m);
            self.alarm = Some(AlarmEvent {
                n_at_alarm: self.n_future,
                ymax: scan.ymax,
                change_point_local: local,
                change_point_global: local + self.offset,
            });
        }
        Ok(Some(ChartPoint {
            n: self.n_future,
            ymax: scan.ymax,
            control_limit: cfg.control_limit,
            alarmed: self.alarm.is_some(),
        }))
    }

    /// Estimated change point `(local, global)` of the latched alarm.
    pub fn change_point(&self) -> Result<(usize, usize)> {
        self.alarm
            .map(|a| (a.change_point_local, a.change_point_global))
            .ok_or(Error::NoAlarm)
    }

    pub fn points(&self) -> Vec<ChartPoint> {
        let limit = self.config.control_limit;
        let n_alarm = self.alarm.map(|a| a.n_at_alarm);
        self.ymax_history
            .iter()
            .map(|&(n, ymax)| ChartPoint {
                n,
                ymax,
                control_limit: limit,
                alarmed: n_alarm.is_some_and(|na| n >= na),
            })
            .collect()
    }
}

/// `argmax_{m ≤ t < N} |SMW_t|`, earliest on ties.
fn argmax_change(scan: &YmaxScan, m: usize) -> usize {
    let mut best_t = m;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in scan.smw.iter().enumerate() {
        let t = scan.j_start + i;
        if t < m {
            continue;
        }
        if s.abs() > best {
            best = s.abs();
            best_t = t;
        }
    }
    best_t
}

/// Change point estimate for the given stream at its current length.
pub fn change_point(data: &[f64], m: usize, m0: usize, lambda: f64) -> Result<usize> {
    let scan = ymax_scan(data, m, m0, lambda)?;
    Ok(argmax_change(&scan, m))
}

/// Writes `n,ymax,control_limit,alarmed` rows.
pub fn write_chart_csv(points: &[ChartPoint], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "n,ymax,control_limit,alarmed")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.n, p.ymax, p.control_limit, p.alarmed)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Outcome of a control-limit calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub h: f64,
    /// Simulated ARL at `h` on the calibration replications.
    pub achieved_arl: f64,
    pub iterations: usize,
}

/// Y-max path of one simulated in-control stream, extended on demand.
///
/// Draws are distinct with probability one, so ranks are maintained
/// incrementally without tie handling.
struct RepPath {
    rng: ChaCha8Rng,
    values: Vec<f64>,
    ranks: Vec<u32>,
    rank_buf: Vec<f64>,
    /// Running maximum of Y-max after `n` future values, at index `n - 1`.
    running_max: Vec<f64>,
}

impl RepPath {
    fn new(seed: u64, rep: u64, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let mut p = Self {
            rng,
            values: Vec::new(),
            ranks: Vec::new(),
            rank_buf: Vec::new(),
            running_max: Vec::new(),
        };
        for _ in 0..m {
            p.push_value();
        }
        p
    }

    fn push_value(&mut self) {
        let x: f64 = self.rng.random();
        let mut below = 0u32;
        for (v, r) in self.values.iter().zip(self.ranks.iter_mut()) {
            if *v > x {
                *r += 1;
            } else {
                below += 1;
            }
        }
        self.values.push(x);
        self.ranks.push(below + 1);
    }

    fn step(&mut self, m: usize, m0: usize, lambda: f64) {
        self.push_value();
        self.rank_buf.clear();
        self.rank_buf.extend(self.ranks.iter().map(|&r| r as f64));
        let (ymax, _) = scan_ranks(&self.rank_buf, 1.0, m - m0, lambda, false);
        let prev = self.running_max.last().copied().unwrap_or(0.0);
        self.running_max.push(prev.max(ymax));
    }

    /// Run length at limit `h`, extending the path up to `horizon` future
    /// values. `None` if no alarm within the horizon.
    fn run_length(&mut self, h: f64, horizon: usize, m: usize, m0: usize, lambda: f64) -> Option<usize> {
        let idx = self.running_max.partition_point(|&v| v <= h);
        if idx < self.running_max.len() {
            return Some(idx + 1);
        }
        while self.running_max.len() < horizon {
            self.step(m, m0, lambda);
            if *self.running_max.last().unwrap() > h {
                return Some(self.running_max.len());
            }
        }
        None
    }
}

struct ArlEstimator {
    paths: Vec<RepPath>,
    m: usize,
    m0: usize,
    lambda: f64,
    cap: usize,
}

impl ArlEstimator {
    /// Mean run length at `h`, truncated at `horizon`; runs still alive at
    /// the horizon count as `horizon`.
    fn truncated_arl(&mut self, h: f64, horizon: usize) -> f64 {
        let (m, m0, lambda) = (self.m, self.m0, self.lambda);
        let total: usize = self
            .paths
            .par_iter_mut()
            .map(|p| p.run_length(h, horizon, m, m0, lambda).unwrap_or(horizon))
            .sum();
        total as f64 / self.paths.len() as f64
    }

    /// Returns the ARL at `h`, or a lower bound already above `target` when
    /// the truncated estimate shows the limit is too high.
    fn arl_vs_target(&mut self, h: f64, target: f64) -> (f64, bool) {
        let short = ((2.0 * target).ceil() as usize).min(self.cap);
        let lower = self.truncated_arl(h, short);
        if lower >= target {
            return (lower, false);
        }
        (self.truncated_arl(h, self.cap), true)
    }
}

/// Monte-Carlo control limit for the given in-control ARL.
///
/// Simulates `reps` uniform in-control streams (the chart is distribution
/// free), then bisects on `h` until the simulated ARL matches `ic_arl`.
pub fn calibrate_limit(m: usize, m0: usize, lambda: f64, ic_arl: f64, reps: usize, seed: u64) -> Result<f64> {
    calibrate_limit_detailed(m, m0, lambda, ic_arl, reps, seed).map(|c| c.h)
}

/// Like [`calibrate_limit`], also reporting the achieved ARL.
pub fn calibrate_limit_detailed(
    m: usize,
    m0: usize,
    lambda: f64,
    ic_arl: f64,
    reps: usize,
    seed: u64,
) -> Result<Calibration> {
    RankChartConfig {
        m,
        m0,
        lambda,
        control_limit: 0.0,
        ic_arl,
    }
    .validate()?;
    if !(ic_arl >= 1.0) {
        return Err(Error::InvalidParameter(format!("target ARL must be ≥ 1, got {ic_arl}")));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    const MAX_ITER: usize = 60;
    const REL_TOL: f64 = 0.002;

    let cap = ((50.0 * ic_arl).ceil() as usize).max(200);
    let mut est = ArlEstimator {
        paths: (0..reps).map(|r| RepPath::new(seed, r as u64, m)).collect(),
        m,
        m0,
        lambda,
        cap,
    };

    let mut lo = 0.0;
    let mut hi = 0.5;
    let mut iterations = 0;
    loop {
        let (arl, _) = est.arl_vs_target(hi, ic_arl);
        if arl >= ic_arl {
            break;
        }
        lo = hi;
        hi *= 1.5;
        iterations += 1;
        if iterations >= MAX_ITER {
            return Err(Error::CalibrationFailure(format!(
                "could not bracket ARL {ic_arl}; reached h = {hi}"
            )));
        }
    }

    let mut best: Option<(f64, f64)> = None;
    for _ in 0..MAX_ITER {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let (arl, exact) = est.arl_vs_target(mid, ic_arl);
        if exact && (arl - ic_arl).abs() <= REL_TOL * ic_arl {
            best = Some((mid, arl));
            break;
        }
        if arl < ic_arl {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (h, achieved) = match best {
        Some(b) => b,
        None => {
            let (arl, _) = est.arl_vs_target(hi, f64::INFINITY);
            (hi, arl)
        }
    };
    if (achieved - ic_arl).abs() > 0.05 * ic_arl {
        return Err(Error::CalibrationFailure(format!(
            "best limit h = {h} gives ARL {achieved}, target {ic_arl}"
        )));
    }
    Ok(Calibration {
        h,
        achieved_arl: achieved,
        iterations,
    })
}

/// Simulated in-control ARL of a fixed limit (independent replications).
pub fn simulate_arl(m: usize, m0: usize, lambda: f64, h: f64, reps: usize, seed: u64, cap: usize) -> f64 {
    let mut est = ArlEstimator {
        paths: (0..reps).map(|r| RepPath::new(seed, r as u64, m)).collect(),
        m,
        m0,
        lambda,
        cap,
    };
    est.truncated_arl(h, cap)
}

/// One row of the calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub m: usize,
    pub m0: usize,
    pub lambda: f64,
    pub ic_arl: f64,
    pub h: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Parses a calibration table (CSV with header `m,m0,lambda,ic_arl,h,reps,seed`).
pub fn parse_calibration_table(text: &str) -> Result<Vec<CalibrationRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_calibration_table(path: &Path) -> Result<Vec<CalibrationRow>> {
    parse_calibration_table(&std::fs::read_to_string(path)?)
}

/// Appends `row`, writing the header first if the file is new or empty.
pub fn append_calibration_row(path: &Path, row: &CalibrationRow) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

/// Limit for the given parameters from a table, if present.
pub fn lookup_limit(rows: &[CalibrationRow], m: usize, m0: usize, lambda: f64, ic_arl: f64) -> Option<f64> {
    rows.iter()
        .find(|r| r.m == m && r.m0 == m0 && (r.lambda - lambda).abs() < 1e-12 && (r.ic_arl - ic_arl).abs() < 1e-9)
        .map(|r| r.h)
}

/// Limit from the table shipped with the crate.
pub fn shipped_limit(m: usize, m0: usize, lambda: f64, ic_arl: f64) -> Option<f64> {
    let rows = parse_calibration_table(SHIPPED_CALIBRATION).ok()?;
    lookup_limit(&rows, m, m0, lambda, ic_arl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// U statistic by direct pair counting, ties counted as one half.
    fn mw_pairs(data: &[f64], j: usize) -> f64 {
        let mut u = 0.0;
        for a in &data[..j] {
            for b in &data[j..] {
                if a > b {
                    u += 1.0;
                } else if a == b {
                    u += 0.5;
                }
            }
        }
        u
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ranks(&[3.0, 1.0, 2.0]), vec![3, 1, 2]);
        assert_eq!(ranks(&[5.0, 2.0, 9.0, 2.0]), vec![3, 2, 4, 2]);
        assert_eq!(ranks(&[7.0; 5]), vec![5; 5]);
    }

    #[test]
    fn smw_hand_example_with_ties() {
        // midranks [3, 1.5, 4, 1.5]: W = 4.5, MW = 1.5, E0 = 2,
        // C_tie = 1 - 6/60 = 0.9, Var0 = 0.9 * 2*2*5/12 = 1.5
        let data = [5.0, 2.0, 9.0, 2.0];
        let (_, c) = midranks(&data);
        assert!((c - 0.9).abs() < 1e-15);
        let s = smw(&data, 2).unwrap();
        assert!((s - (1.5 - 2.0) / 1.5f64.sqrt()).abs() < 1e-12);
        assert!((mw_pairs(&data, 2) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn smw_no_ties_uses_plain_ranks() {
        let data = [0.3, 0.9, 0.1, 0.5, 0.7];
        let r = ranks(&data);
        let w: usize = r[..2].iter().sum();
        let mw = w as f64 - 3.0;
        let expect = (mw - 3.0) / (2.0 * 3.0 * 6.0 / 12.0f64).sqrt();
        assert!((smw(&data, 2).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn smw_out_of_range() {
        assert!(matches!(smw(&[1.0, 2.0], 0), Err(Error::OutOfRange { .. })));
        assert!(matches!(smw(&[1.0, 2.0], 2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn smw_all_tied_is_zero() {
        assert_eq!(smw(&[4.0; 6], 3).unwrap(), 0.0);
    }

    #[test]
    fn smw_extremal_is_minimum() {
        // brute force over every arrangement of 6 distinct values, j = 2
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut min = f64::INFINITY;
        let mut idx = [0usize; 6];
        fn perms(k: usize, used: &mut [bool; 6], idx: &mut [usize; 6], vals: &[f64; 6], min: &mut f64) {
            if k == 6 {
                let d: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
                *min = min.min(smw(&d, 2).unwrap());
                return;
            }
            for i in 0..6 {
                if !used[i] {
                    used[i] = true;
                    idx[k] = i;
                    perms(k + 1, used, idx, vals, min);
                    used[i] = false;
                }
            }
        }
        perms(0, &mut [false; 6], &mut idx, &vals, &mut min);
        let s = smw(&vals, 2).unwrap();
        assert!((s - min).abs() < 1e-12);
    }

    #[test]
    fn smw_null_mean_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 4000;
        let (n, j) = (20, 7);
        let vals: Vec<f64> = (0..reps)
            .map(|_| {
                let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                smw(&d, j).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * sd / (reps as f64).sqrt());
    }

    fn stream(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn constant_stream_never_alarms() {
        let cfg = RankChartConfig {
            control_limit: 0.1,
            ..Default::default()
        };
        let mut st = ChartState::new(cfg, 30).unwrap();
        for _ in 0..60 {
            st.push(1.0).unwrap();
        }
        assert!(st.ymax_history.iter().all(|(_, y)| *y == 0.0));
        assert!(!st.alarmed());
        assert!(matches!(st.change_point(), Err(Error::NoAlarm)));
    }

    #[test]
    fn lambda_near_one_is_max_abs_smw() {
        let data = stream(8, 45);
        let scan = ymax_scan(&data, 30, 4, 1.0 - 1e-12).unwrap();
        let direct = (26..45).map(|j| smw(&data, j).unwrap().abs()).fold(0.0, f64::max);
        assert!((scan.ymax - direct).abs() < 1e-9);
    }

    #[test]
    fn scan_matches_direct_recursion() {
        let data = stream(3, 50);
        let (m, m0, lambda) = (30, 4, 0.05);
        let scan = ymax_scan(&data, m, m0, lambda).unwrap();
        let mut y = 0.0f64;
        let mut ymax = 0.0f64;
        for j in (m - m0)..data.len() {
            y = lambda * smw(&data, j).unwrap() + (1.0 - lambda) * y;
            ymax = ymax.max(y.abs());
        }
        assert!((scan.ymax - ymax).abs() < 1e-12);
    }

    #[test]
    fn tuning_window_emits_nothing() {
        let mut st = ChartState::new(RankChartConfig { control_limit: 0.0, ..Default::default() }, 0).unwrap();
        for x in stream(1, 30) {
            assert!(st.push(x).unwrap().is_none());
        }
        assert_eq!(st.n_future, 0);
        // h = 0: the first future value alarms
        let p = st.push(0.5).unwrap().unwrap();
        assert!(p.alarmed);
        assert_eq!(st.alarm.unwrap().n_at_alarm, 1);
    }

    #[test]
    fn alarm_latches() {
        let mut st = ChartState::new(RankChartConfig { control_limit: 0.3, ..Default::default() }, 30).unwrap();
        for x in stream(2, 30) {
            st.push(x).unwrap();
        }
        for k in 0..40 {
            st.push(5.0 + k as f64).unwrap();
        }
        let first = st.alarm.unwrap();
        for k in 0..10 {
            st.push(-(k as f64)).unwrap();
        }
        assert_eq!(st.alarm.unwrap(), first);
        assert_eq!(st.ymax_history.len(), st.n_future);
        assert_eq!(st.observed.len(), st.config.m + st.n_future);
        assert!(first.change_point_local >= 30 && first.change_point_local < 30 + first.n_at_alarm);
        assert_eq!(first.change_point_global, first.change_point_local + 30);
    }

    #[test]
    fn change_point_concentrates_at_boundary() {
        let (m, n) = (30, 30);
        let mut hits = 0;
        let reps = 100;
        for r in 0..reps {
            let mut d = stream(100 + r, m + n);
            for x in d[m..].iter_mut() {
                *x += 0.6;
            }
            let t = change_point(&d, m, 4, 0.05).unwrap();
            if t.abs_diff(m) <= 3 {
                hits += 1;
            }
        }
        assert!(hits >= 80, "hits {hits}");
    }

    #[test]
    fn incremental_ranks_match_sorting() {
        let mut p = RepPath::new(4, 2, 30);
        for _ in 0..25 {
            p.step(30, 4, 0.05);
        }
        let direct = ymax_scan(&p.values, 30, 4, 0.05).unwrap();
        let mut st = ChartState::new(RankChartConfig::default(), 0).unwrap();
        for &v in &p.values {
            st.push(v).unwrap();
        }
        let last = st.ymax_history.last().unwrap().1;
        assert_eq!(last, direct.ymax);
        // running max path is built from the same ymax values
        let rm = st.ymax_history.iter().map(|x| x.1).fold(0.0, f64::max);
        assert_eq!(*p.running_max.last().unwrap(), rm);
    }

    #[test]
    fn zero_limit_gives_unit_run_length() {
        assert_eq!(simulate_arl(30, 4, 0.05, 0.0, 50, 1, 100), 1.0);
    }

    #[test]
    fn calibration_monotone_in_target() {
        let h1 = calibrate_limit(30, 4, 0.05, 20.0, 300, 11).unwrap();
        let h2 = calibrate_limit(30, 4, 0.05, 40.0, 300, 11).unwrap();
        assert!(h2 > h1, "{h1} vs {h2}");
    }

    #[test]
    fn calibration_deterministic() {
        let a = calibrate_limit_detailed(30, 4, 0.1, 25.0, 200, 3).unwrap();
        let b = calibrate_limit_detailed(30, 4, 0.1, 25.0, 200, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut RankChartConfig)| {
            let mut c = RankChartConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.lambda = 1.0));
        assert!(bad(|c| c.lambda = 0.0));
        assert!(bad(|c| c.m0 = 3));
        assert!(bad(|c| c.m0 = 11));
        assert!(bad(|c| c.m = 4));
    }

    #[test]
    fn calibration_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cal.csv");
        let row = CalibrationRow { m: 30, m0: 4, lambda: 0.05, ic_arl: 50.0, h: 1.2345, reps: 10, seed: 1 };
        append_calibration_row(&path, &row).unwrap();
        append_calibration_row(&path, &CalibrationRow { ic_arl: 100.0, ..row }).unwrap();
        let rows = read_calibration_table(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(lookup_limit(&rows, 30, 4, 0.05, 50.0), Some(1.2345));
        assert_eq!(lookup_limit(&rows, 30, 4, 0.05, 70.0), None);
    }

    #[test]
    fn shipped_table_parses() {
        let rows = parse_calibration_table(SHIPPED_CALIBRATION).unwrap();
        assert!(!rows.is_empty());
        assert!(shipped_limit(30, 4, 0.05, 500.0).is_some());
    }

    proptest! {
        #[test]
        fn smw_matches_pair_counting(data in proptest::collection::vec(0u8..5, 2..=12), jseed in 0usize..1000) {
            let d: Vec<f64> = data.iter().map(|&v| v as f64).collect();
            let n = d.len();
            let j = 1 + jseed % (n - 1);
            let (_, c) = midranks(&d);
            let u = mw_pairs(&d, j);
            let (jf, nf) = (j as f64, n as f64);
            let var = c * jf * (nf - jf) * (nf + 1.0) / 12.0;
            let expect = if var > 0.0 { (u - jf * (nf - jf) / 2.0) / var.sqrt() } else { 0.0 };
            prop_assert!((smw(&d, j).unwrap() - expect).abs() < 1e-10);
        }

        #[test]
        fn tie_correction_bounds(data in proptest::collection::vec(0u8..4, 2..30)) {
            let d: Vec<f64> = data.iter().map(|&v| v as f64).collect();
            let (_, c) = midranks(&d);
            prop_assert!((0.0..=1.0).contains(&c));
            let distinct: Vec<f64> = (0..d.len()).map(|i| i as f64).collect();
            prop_assert_eq!(midranks(&distinct).1, 1.0);
        }
    }
}
