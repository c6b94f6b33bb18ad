//! End-to-end monitoring: training, tuning, the two rank charts on T² and
//! SPE, and the comparison baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distsummary::{mix_with_uniform, PdfOnGrid, Subgroup, DEFAULT_ALPHA_MIX};
use crate::error::{Error, Result};
use crate::fpca::{fit_fpca, FeaturePair, FpcModel, DEFAULT_VAR_FRAC};
use crate::grid::{GridFunction, DEFAULT_GRID_SIZE};
use crate::rankchart::{shipped_limit, AlarmEvent, ChartPoint, ChartState, RankChartConfig};
use crate::stats::{mean, quantile, sample_std};
use crate::warp::{pdf_to_tangent, reference_cdf, CdfOnGrid};

/// Feature construction and charting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Tangent vectors of the warpings, FPCA, rank charts.
    #[default]
    WarpRank,
    /// FPCA on the mixed densities themselves, rank charts.
    PdfFpcaCc,
    /// Warping features with a fixed empirical-quantile upper limit.
    DirectChart,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::WarpRank, Method::PdfFpcaCc, Method::DirectChart];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::WarpRank => "warp_rank",
            Method::PdfFpcaCc => "pdf_fpca_cc",
            Method::DirectChart => "direct_chart",
        }
    }

    fn uses_warping(&self) -> bool {
        !matches!(self, Method::PdfFpcaCc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "warp_rank" => Ok(Method::WarpRank),
            "pdf_fpca_cc" => Ok(Method::PdfFpcaCc),
            "direct_chart" | "direct" => Ok(Method::DirectChart),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Monitoring configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Number of training densities.
    pub n0: usize,
    /// Tuning length of both charts.
    pub m: usize,
    pub alpha_mix: f64,
    pub grid_size: usize,
    pub var_frac: f64,
    pub chart_t2: RankChartConfig,
    pub chart_spe: RankChartConfig,
    pub method: Method,
    /// Upper-tail probability of the direct chart's limit.
    pub alpha_direct: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        let chart = RankChartConfig::default();
        Self {
            n0: 30,
            m: chart.m,
            alpha_mix: DEFAULT_ALPHA_MIX,
            grid_size: DEFAULT_GRID_SIZE,
            var_frac: DEFAULT_VAR_FRAC,
            chart_t2: chart,
            chart_spe: chart,
            method: Method::WarpRank,
            alpha_direct: 0.01,
        }
    }
}

impl MonitorConfig {
    /// Sets the same tuning parameters on both charts; the limit is left
    /// unresolved so it is looked up at training time.
    pub fn with_chart(mut self, m: usize, m0: usize, lambda: f64, ic_arl: f64) -> Self {
        self.m = m;
        let c = RankChartConfig {
            m,
            m0,
            lambda,
            control_limit: f64::INFINITY,
            ic_arl,
        };
        self.chart_t2 = c;
        self.chart_spe = c;
        self
    }

    /// Uses `h` as the control limit of both charts.
    pub fn with_limit(mut self, h: f64) -> Self {
        self.chart_t2.control_limit = h;
        self.chart_spe.control_limit = h;
        self
    }

    /// Fills in unresolved (infinite) control limits from the shipped
    /// calibration table and checks all invariants.
    pub fn resolve(&mut self) -> Result<()> {
        if self.n0 < 5 {
            return Err(Error::InvalidParameter(format!("n0 must be at least 5, got {}", self.n0)));
        }
        if !(self.var_frac > 0.0 && self.var_frac <= 1.0) {
            return Err(Error::InvalidParameter(format!("var_frac must lie in (0, 1], got {}", self.var_frac)));
        }
        if !(self.alpha_direct > 0.0 && self.alpha_direct < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha_direct must lie in (0, 1), got {}",
                self.alpha_direct
            )));
        }
        for chart in [&mut self.chart_t2, &mut self.chart_spe] {
            chart.m = self.m;
            if self.method != Method::DirectChart && !chart.control_limit.is_finite() {
                chart.control_limit = shipped_limit(chart.m, chart.m0, chart.lambda, chart.ic_arl).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "no shipped control limit for m = {}, m0 = {}, lambda = {}, ARL = {}; calibrate one or pass it explicitly",
                        chart.m, chart.m0, chart.lambda, chart.ic_arl
                    ))
                })?;
            }
            chart.validate()?;
        }
        Ok(())
    }
}

/// Per-stage invocation counts, for auditing which computations ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    pub mix: usize,
    pub warp: usize,
    pub fpca_fit: usize,
    pub features: usize,
}

/// Direct chart on one feature: flags values above the `1 − α` quantile of
/// the tuning values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectState {
    pub m: usize,
    pub alpha: f64,
    pub offset: usize,
    pub tuning: Vec<f64>,
    pub ucl: Option<f64>,
    pub n_future: usize,
    pub history: Vec<(usize, f64)>,
    pub alarm: Option<AlarmEvent>,
}

impl DirectState {
    fn push(&mut self, value: f64) -> Result<Option<ChartPoint>> {
        if self.tuning.len() < self.m {
            self.tuning.push(value);
            if self.tuning.len() == self.m {
                self.ucl = Some(quantile(&self.tuning, 1.0 - self.alpha));
            }
            return Ok(None);
        }
        let ucl = self.ucl.expect("set when tuning completes");
        self.n_future += 1;
        self.history.push((self.n_future, value));
        if value > ucl && self.alarm.is_none() {
            let local = self.m + self.n_future - 1;
            self.alarm = Some(AlarmEvent {
                n_at_alarm: self.n_future,
                ymax: value,
                change_point_local: local,
                change_point_global: local + self.offset,
            });
        }
        Ok(Some(ChartPoint {
            n: self.n_future,
            ymax: value,
            control_limit: ucl,
            alarmed: self.alarm.is_some(),
        }))
    }
}

/// One of the two charts of a monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chart {
    Rank(ChartState),
    Direct(DirectState),
}

impl Chart {
    fn push(&mut self, value: f64) -> Result<Option<ChartPoint>> {
        match self {
            Chart::Rank(c) => c.push(value),
            Chart::Direct(c) => c.push(value),
        }
    }

    pub fn alarm(&self) -> Option<AlarmEvent> {
        match self {
            Chart::Rank(c) => c.alarm,
            Chart::Direct(c) => c.alarm,
        }
    }

    /// Plot-ready points (post-tuning only).
    pub fn points(&self) -> Vec<ChartPoint> {
        match self {
            Chart::Rank(c) => c.points(),
            Chart::Direct(c) => {
                let ucl = c.ucl.unwrap_or(f64::NAN);
                let n_alarm = c.alarm.map(|a| a.n_at_alarm);
                c.history
                    .iter()
                    .map(|&(n, v)| ChartPoint {
                        n,
                        ymax: v,
                        control_limit: ucl,
                        alarmed: n_alarm.is_some_and(|na| n >= na),
                    })
                    .collect()
            }
        }
    }

    pub fn control_limit(&self) -> f64 {
        match self {
            Chart::Rank(c) => c.config.control_limit,
            Chart::Direct(c) => c.ucl.unwrap_or(f64::NAN),
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestEvent {
    /// 1-based index of the density in the full sequence (training included).
    pub k: usize,
    pub t2: f64,
    pub spe: f64,
    /// Absent while the tuning window is filling.
    pub ymax_t2: Option<f64>,
    pub ymax_spe: Option<f64>,
    pub alarmed_t2: bool,
    pub alarmed_spe: bool,
}

/// Outcome of one chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartVerdict {
    pub alarmed: bool,
    pub n_at_alarm: Option<usize>,
    pub change_point_global: Option<usize>,
}

impl From<Option<AlarmEvent>> for ChartVerdict {
    fn from(a: Option<AlarmEvent>) -> Self {
        Self {
            alarmed: a.is_some(),
            n_at_alarm: a.map(|a| a.n_at_alarm),
            change_point_global: a.map(|a| a.change_point_global),
        }
    }
}

/// Combined verdict of both charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub t2: ChartVerdict,
    pub spe: ChartVerdict,
    pub combined_alarm: bool,
    pub clamp_count: usize,
    pub degenerate_subgroup_count: usize,
}

impl MonitorVerdict {
    /// Change point of whichever chart alarmed first (T² on a tie).
    pub fn first_change_point(&self) -> Option<usize> {
        match (self.t2.n_at_alarm, self.spe.n_at_alarm) {
            (Some(a), Some(b)) if b < a => self.spe.change_point_global,
            (Some(_), _) => self.t2.change_point_global,
            (None, Some(_)) => self.spe.change_point_global,
            (None, None) => None,
        }
    }
}

/// Trained monitor with both charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub config: MonitorConfig,
    pub model: FpcModel,
    pub charts: [Chart; 2],
    pub counters: StageCounters,
    /// Densities ingested after training.
    pub ingested: usize,
    pub clamp_count: usize,
    pub degenerate_subgroup_count: usize,
}

/// Saved monitor together with its verdict at save time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub monitor: Monitor,
    pub verdict: MonitorVerdict,
}

fn feature_function(
    f: &PdfOnGrid,
    method: Method,
    reference: Option<&CdfOnGrid>,
    alpha_mix: f64,
    counters: &mut StageCounters,
) -> Result<GridFunction> {
    counters.mix += 1;
    if method.uses_warping() {
        counters.warp += 1;
        let r = reference.expect("warping methods carry a reference");
        Ok(pdf_to_tangent(f, r, alpha_mix)?.into_grid())
    } else {
        Ok(mix_with_uniform(f, alpha_mix)?.into_grid())
    }
}

/// Fits the FPC model on `n0` training densities. Warping methods also
/// return the reference CDF the tangents were built against.
pub fn train(training: &[PdfOnGrid], cfg: &MonitorConfig) -> Result<(FpcModel, Option<CdfOnGrid>)> {
    let mut counters = StageCounters::default();
    train_counted(training, cfg, &mut counters)
}

fn train_counted(
    training: &[PdfOnGrid],
    cfg: &MonitorConfig,
    counters: &mut StageCounters,
) -> Result<(FpcModel, Option<CdfOnGrid>)> {
    if training.len() != cfg.n0 {
        return Err(Error::InsufficientData(format!(
            "expected {} training densities, got {}",
            cfg.n0,
            training.len()
        )));
    }
    for f in training {
        if f.grid_size() != cfg.grid_size {
            return Err(Error::GridMismatch {
                expected: cfg.grid_size,
                got: f.grid_size(),
            });
        }
    }
    let reference = if cfg.method.uses_warping() {
        let mixed = training
            .iter()
            .map(|f| mix_with_uniform(f, cfg.alpha_mix))
            .collect::<Result<Vec<_>>>()?;
        Some(reference_cdf(&mixed)?)
    } else {
        None
    };
    let functions = training
        .iter()
        .map(|f| feature_function(f, cfg.method, reference.as_ref(), cfg.alpha_mix, counters))
        .collect::<Result<Vec<_>>>()?;
    counters.fpca_fit += 1;
    let mut model = fit_fpca(&functions, cfg.var_frac)?;
    if let Some(r) = &reference {
        model = model.with_reference(r.clone());
    }
    Ok((model, reference))
}

impl Monitor {
    /// Trains on exactly `cfg.n0` densities and sets up both charts.
    pub fn train(training: &[PdfOnGrid], cfg: &MonitorConfig) -> Result<Self> {
        let mut config = cfg.clone();
        config.resolve()?;
        let mut counters = StageCounters::default();
        let (model, _) = train_counted(training, &config, &mut counters)?;
        let make = |c: RankChartConfig| -> Result<Chart> {
            Ok(match config.method {
                Method::DirectChart => Chart::Direct(DirectState {
                    m: config.m,
                    alpha: config.alpha_direct,
                    offset: config.n0,
                    tuning: Vec::new(),
                    ucl: None,
                    n_future: 0,
                    history: Vec::new(),
                    alarm: None,
                }),
                _ => Chart::Rank(ChartState::new(c, config.n0)?),
            })
        };
        if config.method == Method::DirectChart && config.m < 10 {
            return Err(Error::InsufficientTuning(format!(
                "direct chart needs at least 10 tuning values, got {}",
                config.m
            )));
        }
        let charts = [make(config.chart_t2)?, make(config.chart_spe)?];
        Ok(Self {
            config,
            model,
            charts,
            counters,
            ingested: 0,
            clamp_count: 0,
            degenerate_subgroup_count: 0,
        })
    }

    /// Records preprocessing diagnostics to be reported in the verdict.
    pub fn set_diagnostics(&mut self, clamp_count: usize, degenerate_subgroup_count: usize) {
        self.clamp_count = clamp_count;
        self.degenerate_subgroup_count = degenerate_subgroup_count;
    }

    /// 1-based index the next ingested density will get.
    pub fn next_index(&self) -> usize {
        self.config.n0 + self.ingested + 1
    }

    pub fn features(&mut self, f: &PdfOnGrid) -> Result<FeaturePair> {
        if f.grid_size() != self.config.grid_size {
            return Err(Error::GridMismatch {
                expected: self.config.grid_size,
                got: f.grid_size(),
            });
        }
        let v = feature_function(
            f,
            self.config.method,
            self.model.reference_cdf.as_ref(),
            self.config.alpha_mix,
            &mut self.counters,
        )?;
        self.counters.features += 1;
        self.model.features(&v, self.next_index())
    }

    /// Feeds one density to both charts.
    pub fn ingest(&mut self, f: &PdfOnGrid) -> Result<IngestEvent> {
        let fp = self.features(f)?;
        let p_t2 = self.charts[0].push(fp.t2)?;
        let p_spe = self.charts[1].push(fp.spe)?;
        self.ingested += 1;
        Ok(IngestEvent {
            k: fp.index,
            t2: fp.t2,
            spe: fp.spe,
            ymax_t2: p_t2.map(|p| p.ymax),
            ymax_spe: p_spe.map(|p| p.ymax),
            alarmed_t2: self.charts[0].alarm().is_some(),
            alarmed_spe: self.charts[1].alarm().is_some(),
        })
    }

    pub fn verdict(&self) -> MonitorVerdict {
        let t2 = ChartVerdict::from(self.charts[0].alarm());
        let spe = ChartVerdict::from(self.charts[1].alarm());
        MonitorVerdict {
            t2,
            spe,
            combined_alarm: t2.alarmed || spe.alarmed,
            clamp_count: self.clamp_count,
            degenerate_subgroup_count: self.degenerate_subgroup_count,
        }
    }

    pub fn session(&self) -> Session {
        Session {
            monitor: self.clone(),
            verdict: self.verdict(),
        }
    }

    pub fn to_session_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.session())?)
    }

    pub fn from_session_json(s: &str) -> Result<Self> {
        let session: Session = serde_json::from_str(s)?;
        Ok(session.monitor)
    }
}

/// Result of running a whole density sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    pub verdict: MonitorVerdict,
    pub events: Vec<IngestEvent>,
    /// Index `k` of the density at which the first alarm fired.
    pub alarm_index: Option<usize>,
    pub counters: StageCounters,
}

impl SequenceRun {
    pub fn first_alarm_index(&self) -> Option<usize> {
        self.alarm_index
    }

    pub fn change_point(&self) -> Option<usize> {
        self.verdict.first_change_point()
    }
}

/// Trains on the first `n0` densities and ingests the rest, stopping at
/// the first alarm.
pub fn run_sequence(pdfs: &[PdfOnGrid], cfg: &MonitorConfig) -> Result<SequenceRun> {
    if pdfs.len() <= cfg.n0 + cfg.m {
        return Err(Error::InsufficientData(format!(
            "{} densities cannot cover {} training and {} tuning",
            pdfs.len(),
            cfg.n0,
            cfg.m
        )));
    }
    let mut mon = Monitor::train(&pdfs[..cfg.n0], cfg)?;
    let mut events = Vec::with_capacity(pdfs.len() - cfg.n0);
    let mut alarm_index = None;
    for f in &pdfs[cfg.n0..] {
        let e = mon.ingest(f)?;
        events.push(e);
        if e.alarmed_t2 || e.alarmed_spe {
            alarm_index = Some(e.k);
            break;
        }
    }
    Ok(SequenceRun {
        verdict: mon.verdict(),
        events,
        alarm_index,
        counters: mon.counters,
    })
}

// ---------------------------------------------------------------------------
// Shewhart X-bar / S baseline
// ---------------------------------------------------------------------------

/// Bias-correction constant `c₄(n) = √(2/(n−1)) Γ(n/2) / Γ((n−1)/2)`.
pub fn c4(n: usize) -> f64 {
    let nf = n as f64;
    (2.0 / (nf - 1.0)).sqrt() * (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp()
}

/// Shewhart chart table: limits plus one statistic per subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShewhartChart {
    pub center: f64,
    pub lcl: f64,
    pub ucl: f64,
    pub points: Vec<f64>,
    /// 1-based subgroup indices outside the limits.
    pub flagged: Vec<usize>,
}

impl ShewhartChart {
    fn new(center: f64, lcl: f64, ucl: f64, points: Vec<f64>) -> Self {
        // absorb rounding so constant data sits on zero-width limits
        let eps = 1e-12 * (1.0 + center.abs());
        let flagged = points
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > ucl + eps || p < lcl - eps)
            .map(|(i, _)| i + 1)
            .collect();
        Self {
            center,
            lcl,
            ucl,
            points,
            flagged,
        }
    }
}

/// X-bar and S charts with 3-sigma limits estimated from the first
/// `n_calibration` subgroups. All subgroups must share one size.
pub fn xbar_s_baseline(subgroups: &[Subgroup], n_calibration: usize) -> Result<(ShewhartChart, ShewhartChart)> {
    let m = subgroups
        .first()
        .map(|g| g.values.len())
        .ok_or_else(|| Error::InsufficientData("no subgroups".into()))?;
    if m < 2 {
        return Err(Error::InvalidParameter(format!("subgroup size must be at least 2, got {m}")));
    }
    if let Some(g) = subgroups.iter().find(|g| g.values.len() != m) {
        return Err(Error::InvalidParameter(format!(
            "subgroup {} has {} values, expected {m}",
            g.index,
            g.values.len()
        )));
    }
    if n_calibration == 0 || subgroups.len() < n_calibration {
        return Err(Error::InsufficientData(format!(
            "{} subgroups available, {n_calibration} needed for calibration",
            subgroups.len()
        )));
    }
    let means: Vec<f64> = subgroups.iter().map(|g| mean(&g.values)).collect();
    let sds: Vec<f64> = subgroups.iter().map(|g| sample_std(&g.values)).collect();
    let xbarbar = mean(&means[..n_calibration]);
    let sbar = mean(&sds[..n_calibration]);
    let c = c4(m);
    let sigma = sbar / c;
    let half = 3.0 * sigma / (m as f64).sqrt();
    let xbar = ShewhartChart::new(xbarbar, xbarbar - half, xbarbar + half, means);
    let s_half = 3.0 * sbar * (1.0 - c * c).sqrt() / c;
    let s = ShewhartChart::new(sbar, (sbar - s_half).max(0.0), sbar + s_half, sds);
    Ok((xbar, s))
}

// ---------------------------------------------------------------------------
// Direct charting baseline
// ---------------------------------------------------------------------------

/// Direct chart table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectChartTable {
    pub ucl: f64,
    pub n_tune: usize,
    /// 1-based feature indices after the tuning segment that exceed the limit.
    pub flagged: Vec<usize>,
}

/// Upper limit at the `1 − α` sample quantile of the first `n_tune` features;
/// every later feature strictly above it is flagged.
pub fn direct_chart_baseline(features: &[f64], n_tune: usize, alpha: f64) -> Result<DirectChartTable> {
    if n_tune < 10 {
        return Err(Error::InsufficientTuning(format!(
            "direct chart needs at least 10 tuning values, got {n_tune}"
        )));
    }
    if features.len() <= n_tune {
        return Err(Error::InsufficientData(format!(
            "{} features leave nothing to monitor after {n_tune} tuning values",
            features.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let ucl = quantile(&features[..n_tune], 1.0 - alpha);
    let flagged = features
        .iter()
        .enumerate()
        .skip(n_tune)
        .filter(|(_, &v)| v > ucl)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(DirectChartTable { ucl, n_tune, flagged })
}
