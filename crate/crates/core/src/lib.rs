//! Distribution-valued process monitoring.
//!
//! Each subgroup of a scalar feature stream is summarized by a density on
//! `[0, 1]`. Densities are aligned to a reference through warping
//! functions, mapped to a linear tangent space, reduced with functional
//! PCA, and the resulting Hotelling T² and SPE streams are watched by
//! rank-based change-point charts.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distsummary;
pub mod error;
pub mod fpca;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod rankchart;
pub mod simgen;
pub mod stats;
pub mod warp;

pub use distsummary::{
    boxplot_filter, estimate_support, kde_unit, mix_with_uniform, partition_daily, partition_equal,
    scale_to_unit, summarize_series, DistributionSummary, DsfSeries, PdfOnGrid, Subgroup, Subgrouping,
    SummaryConfig, SupportInterval,
};
pub use error::{Error, Result};
pub use fpca::{fit_fpca, FeaturePair, FpcModel};
pub use grid::{GridFunction, DEFAULT_GRID_SIZE};
pub use pipeline::{
    direct_chart_baseline, run_sequence, xbar_s_baseline, Method, Monitor, MonitorConfig, MonitorVerdict,
};
pub use rankchart::{calibrate_limit, ranks, smw, AlarmEvent, ChartState, RankChartConfig};
pub use simgen::{
    appendix1_series, beta_pdf, beta_sample, power_study, BetaSpec, PdfSequence, PowerStudyReport, Scenario,
    ScenarioSpec,
};
pub use warp::{
    cdf_of, extract_warping, pdf_to_tangent, quantile_of, reference_cdf, srsf_of, tangent_map, CdfOnGrid,
    SrsfOnGrid, TangentVec, WarpOnGrid,
};
