use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

use warpchart::distsummary::{summarize_series, Subgrouping, SummaryConfig, DEFAULT_FENCE_K, DEFAULT_THETA_WIDEN};
use warpchart::io::{read_dsf_csv, read_pdf_sequence, write_dsf_csv, write_pdf_sequence, PdfSequenceMeta};
use warpchart::pipeline::{train, Method, Monitor, MonitorConfig};
use warpchart::rankchart::{
    append_calibration_row, calibrate_limit_detailed, lookup_limit, read_calibration_table, write_chart_csv,
    CalibrationRow,
};
use warpchart::simgen::{
    appendix1_series, power_study, simulate_scenario2_outliers_on, simulate_scenario_on, Scenario, ScenarioSpec,
};
use warpchart::{PdfOnGrid, DEFAULT_GRID_SIZE};

use crate::config::{write_json, Effective, FileConfig};
use crate::{Cli, Command, Generator, InputArgs, ModelArgs, Outcome, UsageError};

/// Record of one invocation, enough to re-run it with `--config`.
#[derive(Debug, Serialize)]
struct RunManifest {
    command: &'static str,
    version: &'static str,
    config_path: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    output: PathBuf,
    seed: Option<u64>,
    config: BTreeMap<String, Value>,
}

fn manifest_beside(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn init_workers(workers: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            anyhow::bail!(UsageError("--workers must be at least 1".into()));
        }
        // a pool can only be installed once per process; ignore repeats
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let cfg_path = cli.config.clone();
    match cli.command {
        Command::Simulate(a) => simulate(a, &file, cfg_path),
        Command::Calibrate(a) => calibrate(a, &file, cfg_path),
        Command::Train(a) => train_cmd(a, &file, cfg_path),
        Command::Monitor(a) => monitor(a, &file, cfg_path),
        Command::PowerStudy(a) => power(a, &file, cfg_path),
    }
}

fn simulate(a: crate::SimulateArgs, file: &FileConfig, config_path: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mut eff = Effective::default();
    eff.record("generator", &a.generator);
    let seed: u64 = eff.pick(file, "seed", a.seed, 0)?;
    let output: PathBuf = eff.require(file, "output", a.output)?;
    match a.generator {
        Generator::Appendix1 => {
            let z = appendix1_series(seed);
            write_dsf_csv(&z, &output)?;
        }
        g => {
            let grid: usize = eff.pick(file, "grid-size", a.grid_size, DEFAULT_GRID_SIZE)?;
            let seq = match g {
                Generator::Scenario2Outliers => simulate_scenario2_outliers_on(seed, grid)?,
                _ => {
                    let delta: f64 = eff.require(file, "delta", a.delta)?;
                    let which = if g == Generator::Scenario1 { Scenario::One } else { Scenario::Two };
                    simulate_scenario_on(&ScenarioSpec::scenario(which, delta, seed), grid)?
                }
            };
            let meta = PdfSequenceMeta {
                grid_size: grid,
                alpha_mix: 0.0,
                support: None,
                tau: Some(seq.tau),
                seed: Some(seed),
            };
            write_pdf_sequence(&seq.pdfs, &meta, &output)?;
        }
    }
    write_json(
        &manifest_beside(&output),
        &RunManifest {
            command: "simulate",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            inputs: vec![],
            output: output.clone(),
            seed: Some(seed),
            config: eff.values,
        },
    )?;
    println!("wrote {}", output.display());
    Ok(Outcome::Clean)
}

fn calibrate(a: crate::CalibrateArgs, file: &FileConfig, config_path: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mut eff = Effective::default();
    let m: usize = eff.pick(file, "m", a.m, 30)?;
    let m0: usize = eff.pick(file, "m0", a.m0, 4)?;
    let lambda: f64 = eff.pick(file, "lambda", a.lambda, 0.05)?;
    let ic_arl: f64 = eff.pick(file, "ic-arl", a.ic_arl, 500.0)?;
    let reps: usize = eff.pick(file, "reps", a.reps, 2000)?;
    let seed: u64 = eff.pick(file, "seed", a.seed, 1)?;
    let table: PathBuf = eff.pick(file, "table", a.table, PathBuf::from("calibration.csv"))?;
    let workers = eff.pick_opt(file, "workers", a.workers)?;
    init_workers(workers)?;

    let cal = calibrate_limit_detailed(m, m0, lambda, ic_arl, reps, seed)?;
    append_calibration_row(
        &table,
        &CalibrationRow {
            m,
            m0,
            lambda,
            ic_arl,
            h: cal.h,
            reps,
            seed,
        },
    )?;
    write_json(
        &manifest_beside(&table),
        &RunManifest {
            command: "calibrate",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            inputs: vec![],
            output: table.clone(),
            seed: Some(seed),
            config: eff.values,
        },
    )?;
    eprintln!("simulated ARL {:.1} after {} evaluations", cal.achieved_arl, cal.iterations);
    println!("{}", cal.h);
    Ok(Outcome::Clean)
}

/// Densities plus preprocessing diagnostics.
struct LoadedPdfs {
    pdfs: Vec<PdfOnGrid>,
    clamp_count: usize,
    degenerate_subgroup_count: usize,
    inputs: Vec<PathBuf>,
}

fn load_pdfs(a: &InputArgs, file: &FileConfig, eff: &mut Effective, n0: usize, grid: usize) -> anyhow::Result<LoadedPdfs> {
    let pdfs_path: Option<PathBuf> = eff.pick_opt(file, "pdfs", a.pdfs.clone())?;
    let input: Option<PathBuf> = if pdfs_path.is_none() {
        eff.pick_opt(file, "input", a.input.clone())?
    } else {
        None
    };
    if let Some(p) = pdfs_path {
        let (pdfs, _) = read_pdf_sequence(&p).with_context(|| format!("reading {}", p.display()))?;
        if let Some(f) = pdfs.first() {
            if f.grid_size() != grid {
                anyhow::bail!(UsageError(format!(
                    "density file has {} grid points but grid-size is {grid}",
                    f.grid_size()
                )));
            }
        }
        return Ok(LoadedPdfs {
            pdfs,
            clamp_count: 0,
            degenerate_subgroup_count: 0,
            inputs: vec![p],
        });
    }
    let Some(input) = input else {
        anyhow::bail!(UsageError("give either --input (raw CSV) or --pdfs (density CSV)".into()));
    };
    let daily: bool = eff.pick(file, "daily", a.daily.then_some(true), false)?;
    let subgrouping = if daily {
        Subgrouping::Daily
    } else {
        let size: usize = eff
            .pick_opt(file, "subgroup-size", a.subgroup_size)?
            .ok_or_else(|| UsageError("raw input needs --subgroup-size or --daily".into()))?;
        Subgrouping::Equal(size)
    };
    let cfg = SummaryConfig {
        subgrouping,
        n_training: n0,
        theta_widen: eff.pick(file, "theta-widen", a.theta_widen, DEFAULT_THETA_WIDEN)?,
        fence_k: eff.pick(file, "fence-k", a.fence_k, DEFAULT_FENCE_K)?,
        grid_size: grid,
    };
    let series = read_dsf_csv(&input).with_context(|| format!("reading {}", input.display()))?;
    let summary = summarize_series(&series, &cfg)?;
    Ok(LoadedPdfs {
        pdfs: summary.pdfs,
        clamp_count: summary.clamp_count,
        degenerate_subgroup_count: summary.degenerate_subgroup_count,
        inputs: vec![input],
    })
}

fn monitor_config(a: &ModelArgs, file: &FileConfig, eff: &mut Effective) -> anyhow::Result<MonitorConfig> {
    let d = MonitorConfig::default();
    let method: String = eff.pick(file, "method", a.method.clone(), d.method.as_str().replace('_', "-"))?;
    let method: Method = method.parse()?;
    let n0 = eff.pick(file, "n0", a.n0, d.n0)?;
    let m = eff.pick(file, "m", a.m, d.m)?;
    let m0 = eff.pick(file, "m0", a.m0, d.chart_t2.m0)?;
    let lambda = eff.pick(file, "lambda", a.lambda, d.chart_t2.lambda)?;
    let ic_arl = eff.pick(file, "ic-arl", a.ic_arl, d.chart_t2.ic_arl)?;
    let mut cfg = MonitorConfig {
        n0,
        alpha_mix: eff.pick(file, "alpha-mix", a.alpha_mix, d.alpha_mix)?,
        grid_size: eff.pick(file, "grid-size", a.grid_size, d.grid_size)?,
        var_frac: eff.pick(file, "var-frac", a.var_frac, d.var_frac)?,
        method,
        alpha_direct: eff.pick(file, "alpha-direct", a.alpha_direct, d.alpha_direct)?,
        ..d
    }
    .with_chart(m, m0, lambda, ic_arl);
    let h: Option<f64> = eff.pick_opt(file, "h", a.h)?;
    let table: Option<PathBuf> = eff.pick_opt(file, "calibration-table", a.calibration_table.clone())?;
    let h = match (h, table) {
        (Some(h), _) => Some(h),
        (None, Some(t)) => lookup_limit(&read_calibration_table(&t)?, m, m0, lambda, ic_arl),
        (None, None) => None,
    };
    if let Some(h) = h {
        cfg = cfg.with_limit(h);
    }
    cfg.resolve()?;
    if method != Method::DirectChart {
        eff.record("h", &cfg.chart_t2.control_limit);
    }
    Ok(cfg)
}

fn train_cmd(a: crate::TrainArgs, file: &FileConfig, config_path: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mut eff = Effective::default();
    let cfg = monitor_config(&a.model, file, &mut eff)?;
    let output: PathBuf = eff.require(file, "output", a.output)?;
    let loaded = load_pdfs(&a.input, file, &mut eff, cfg.n0, cfg.grid_size)?;
    if loaded.pdfs.len() < cfg.n0 {
        return Err(warpchart::Error::InsufficientData(format!(
            "{} densities, {} needed for training",
            loaded.pdfs.len(),
            cfg.n0
        ))
        .into());
    }
    let (model, _) = train(&loaded.pdfs[..cfg.n0], &cfg)?;
    std::fs::write(&output, model.to_json()? + "\n")?;
    write_json(
        &manifest_beside(&output),
        &RunManifest {
            command: "train",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            inputs: loaded.inputs,
            output: output.clone(),
            seed: None,
            config: eff.values,
        },
    )?;
    println!(
        "retained {} of {} components ({:.4} of variance); wrote {}",
        model.retained,
        model.eigenvalues.len(),
        model.explained_fraction(),
        output.display()
    );
    Ok(Outcome::Clean)
}

fn monitor(a: crate::MonitorArgs, file: &FileConfig, config_path: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mut eff = Effective::default();
    let cfg = monitor_config(&a.model, file, &mut eff)?;
    let out_dir: PathBuf = eff.require(file, "out-dir", a.out_dir)?;
    let loaded = load_pdfs(&a.input, file, &mut eff, cfg.n0, cfg.grid_size)?;
    if loaded.pdfs.len() < cfg.n0 + cfg.m {
        return Err(warpchart::Error::InsufficientData(format!(
            "{} densities cannot cover {} training and {} tuning",
            loaded.pdfs.len(),
            cfg.n0,
            cfg.m
        ))
        .into());
    }
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut mon = Monitor::train(&loaded.pdfs[..cfg.n0], &cfg)?;
    mon.set_diagnostics(loaded.clamp_count, loaded.degenerate_subgroup_count);
    let mut log = std::io::BufWriter::new(std::fs::File::create(out_dir.join("events.jsonl"))?);
    for f in &loaded.pdfs[cfg.n0..] {
        let e = mon.ingest(f)?;
        serde_json::to_writer(&mut log, &e)?;
        log.write_all(b"\n")?;
    }
    log.flush()?;
    write_chart_csv(&mon.charts[0].points(), &out_dir.join("chart_t2.csv"))?;
    write_chart_csv(&mon.charts[1].points(), &out_dir.join("chart_spe.csv"))?;
    let verdict = mon.verdict();
    write_json(&out_dir.join("verdict.json"), &verdict)?;
    std::fs::write(out_dir.join("session.json"), mon.to_session_json()? + "\n")?;
    write_json(
        &out_dir.join("manifest.json"),
        &RunManifest {
            command: "monitor",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            inputs: loaded.inputs,
            output: out_dir.clone(),
            seed: None,
            config: eff.values,
        },
    )?;

    let describe = |name: &str, v: &warpchart::pipeline::ChartVerdict| match (v.n_at_alarm, v.change_point_global) {
        (Some(n), Some(t)) => println!("{name}: alarm at n = {n}, estimated change point {t}"),
        _ => println!("{name}: no alarm"),
    };
    describe("T2 chart", &verdict.t2);
    describe("SPE chart", &verdict.spe);
    Ok(if verdict.combined_alarm { Outcome::Alarm } else { Outcome::Clean })
}

fn power(a: crate::PowerStudyArgs, file: &FileConfig, config_path: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mut eff = Effective::default();
    let scenario: String = eff.pick(file, "scenario", a.scenario, "1".into())?;
    let scenario: Scenario = scenario.parse().map_err(|e: warpchart::Error| UsageError(e.to_string()))?;
    let deltas: Vec<f64> = eff.require(file, "deltas", a.deltas)?;
    let reps: usize = eff.pick(file, "reps", a.reps, 100)?;
    let methods: Vec<String> = eff.pick(file, "methods", a.methods, vec!["warp-rank".into()])?;
    let methods = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?;
    let seed: u64 = eff.pick(file, "seed", a.seed, 1)?;
    let workers = eff.pick_opt(file, "workers", a.workers)?;
    let output: PathBuf = eff.require(file, "output", a.output)?;
    init_workers(workers)?;

    let model = ModelArgs {
        n0: None,
        m: None,
        m0: a.m0,
        lambda: a.lambda,
        h: a.h,
        ic_arl: a.ic_arl,
        method: None,
        var_frac: None,
        alpha_mix: None,
        grid_size: a.grid_size,
        alpha_direct: None,
        calibration_table: a.calibration_table,
    };
    let cfg = monitor_config(&model, file, &mut eff)?;
    let report = power_study(scenario, &deltas, reps, &methods, seed, &cfg)?;
    report.write(&output)?;
    write_json(
        &manifest_beside(&output),
        &RunManifest {
            command: "power-study",
            version: env!("CARGO_PKG_VERSION"),
            config_path,
            inputs: vec![],
            output: output.clone(),
            seed: Some(seed),
            config: eff.values,
        },
    )?;
    print!("{}", report.to_csv());
    Ok(Outcome::Clean)
}
