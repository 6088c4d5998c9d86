//! One function per pipeline stage. Stages exchange files only.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use bandsleep_core::metrics::{build_report, CombinedReport, EnergyModel, StrategyReport};
use bandsleep_core::planner::{plan_reference, read_plan, write_plan, BandPlan, Granularity};
use bandsleep_core::predictor::{
    load_checkpoint, make_windows, predict_series, train, write_checkpoint, Checkpoint, Dataset, Hyperparams,
};
use bandsleep_core::sim::{simulate_with, DelayReport, SimOptions};
use bandsleep_core::synth::{generate_trace, SynthParams};
use bandsleep_core::trace::{aggregate_theta, read_trace, total_demand_per_tti, TraceFormat, TraceSeries};
use bandsleep_core::{CellConfig, Runs, MS_PER_DAY};
use serde::{Deserialize, Serialize};

use crate::days::{contiguous_segments, single_segment, DayRange};
use crate::output::{write_file, write_json, write_output};

pub fn load_cell(path: Option<&Path>, granularity: Granularity) -> anyhow::Result<CellConfig> {
    let cell = match path {
        Some(p) => CellConfig::from_json_file(p).with_context(|| format!("reading cell config {}", p.display()))?,
        None => CellConfig::default_four_band(),
    };
    Ok(cell.with_activation_ms(granularity.activation_ms())?)
}

/// Reads a trace from `path`, or stdin for `None` / `-`.
pub fn load_trace(path: Option<&Path>, cell: &CellConfig) -> anyhow::Result<TraceSeries> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::open(p).with_context(|| format!("opening trace {}", p.display()))?;
            Ok(read_trace(BufReader::new(file), cell).with_context(|| format!("parsing trace {}", p.display()))?)
        }
        _ => Ok(read_trace(io::stdin().lock(), cell).context("parsing trace from stdin")?),
    }
}

pub fn load_plan(path: &Path, activation_ms: u64) -> anyhow::Result<bandsleep_core::planner::PlanFile> {
    let file = File::open(path).with_context(|| format!("opening plan {}", path.display()))?;
    read_plan(BufReader::new(file), activation_ms).with_context(|| format!("parsing plan {}", path.display()))
}

pub fn periods_per_day(activation_ms: u64) -> anyhow::Result<usize> {
    anyhow::ensure!(
        MS_PER_DAY.is_multiple_of(activation_ms),
        "activation period of {activation_ms} ms does not divide a day"
    );
    Ok((MS_PER_DAY / activation_ms) as usize)
}

pub fn synth(params: &SynthParams, cell: &CellConfig, format: TraceFormat, out: Option<&Path>) -> anyhow::Result<()> {
    let trace = generate_trace(params, cell)?;
    write_output(out, |w| Ok(trace.write_csv(w, format)?))
}

pub fn plan(trace: &TraceSeries, out: Option<&Path>) -> anyhow::Result<BandPlan> {
    let plan = plan_reference(&aggregate_theta(trace), trace.cell())?;
    write_output(out, |w| Ok(write_plan(w, &plan, None)?))?;
    Ok(plan)
}

/// Demand of the TTIs covered by `plan`, with the plan's tail flag set when
/// the trace ends inside its last period.
fn demand_for(trace: &TraceSeries, plan: &BandPlan) -> anyhow::Result<(Runs<u64>, BandPlan)> {
    let t = plan.activation_ms;
    let start = plan.start_period * t;
    let end = start + plan.len() as u64 * t;
    anyhow::ensure!(
        start < trace.len(),
        "plan starts at period {} but the trace holds {} TTIs",
        plan.start_period,
        trace.len()
    );
    let mut plan = plan.clone();
    if end > trace.len() {
        anyhow::ensure!(
            end - trace.len() < t,
            "plan covers {end} TTIs but the trace holds only {}",
            trace.len()
        );
        plan.partial_tail = true;
    }
    Ok((total_demand_per_tti(&trace.slice(start, end.min(trace.len()))), plan))
}

pub fn simulate(trace: &TraceSeries, plan: &BandPlan, opts: SimOptions) -> anyhow::Result<DelayReport> {
    let (demand, plan) = demand_for(trace, plan)?;
    Ok(simulate_with(&demand, &plan, trace.cell(), opts)?)
}

/// Training samples from the plan periods of `days`. Windows never span a
/// gap between selected days.
pub fn training_set(plan: &BandPlan, days: &[u32], hp: &Hyperparams, num_bands: usize) -> anyhow::Result<Dataset> {
    let per_day = periods_per_day(plan.activation_ms)?;
    let mut merged: Option<Dataset> = None;
    for seg in contiguous_segments(days) {
        let (lo, hi) = (seg.start as usize * per_day, seg.end as usize * per_day);
        anyhow::ensure!(
            plan.start_period == 0 && hi <= plan.len(),
            "training days {}..{} lie outside the plan ({} periods)",
            seg.start,
            seg.end,
            plan.len()
        );
        let part = make_windows(&plan.slice(lo, hi), hp.window_k, num_bands)
            .with_context(|| format!("building windows for days {}..{}", seg.start, seg.end))?;
        match merged.as_mut() {
            None => merged = Some(part),
            Some(m) => {
                m.inputs.extend(part.inputs);
                m.targets.extend(part.targets);
            }
        }
    }
    merged.ok_or_else(|| anyhow::anyhow!("no training days selected"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

pub fn train_model(
    plan: &BandPlan,
    days: &[u32],
    hp: &Hyperparams,
    num_bands: usize,
    out: &Path,
) -> anyhow::Result<TrainSummary> {
    let data = training_set(plan, days, hp, num_bands)?;
    let report = train(&data, hp)?;
    let ckpt = Checkpoint::new(hp.clone(), report.model);
    write_file(out, |w| {
        write_checkpoint(w, &ckpt)?;
        Ok(())
    })?;
    Ok(TrainSummary {
        samples: data.len(),
        train_loss: report.train_loss,
        val_loss: report.val_loss,
    })
}

/// One-step-ahead predictions for every period of `days`, each from the
/// observed periods before it.
pub fn predict(checkpoint: &Path, history: &BandPlan, days: &[u32], out: Option<&Path>) -> anyhow::Result<BandPlan> {
    let ckpt = load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let per_day = periods_per_day(history.activation_ms)?;
    let seg = single_segment(days)?;
    anyhow::ensure!(history.start_period == 0, "history must start at period 0");
    let start = seg.start as usize * per_day;
    let horizon = (seg.end - seg.start) as usize * per_day;
    anyhow::ensure!(
        start + horizon <= history.len(),
        "days {}..{} lie outside the plan ({} periods)",
        seg.start,
        seg.end,
        history.len()
    );
    let pred = predict_series(&ckpt.model, history, start, horizon)?;
    let plan = pred.to_plan(history);
    write_output(out, |w| Ok(write_plan(w, &plan, Some(&pred.raw))?))?;
    Ok(plan)
}

pub fn default_models(cell: &CellConfig) -> Vec<EnergyModel> {
    EnergyModel::defaults_for(cell)
}

/// Scores `predicted` against the matching periods of `reference` and
/// simulates both on the trace.
pub fn evaluate(
    trace: &TraceSeries,
    reference: &BandPlan,
    predicted: &BandPlan,
    models: &[EnergyModel],
) -> anyhow::Result<CombinedReport> {
    let lo = predicted
        .start_period
        .checked_sub(reference.start_period)
        .ok_or_else(|| anyhow::anyhow!("prediction starts before the reference plan"))? as usize;
    let hi = lo + predicted.len();
    anyhow::ensure!(hi <= reference.len(), "prediction runs past the reference plan");
    let reference = reference.slice(lo, hi);
    let opts = SimOptions::default();
    let delay_ref = simulate(trace, &reference, opts)?;
    let delay_pred = simulate(trace, predicted, opts)?;
    Ok(build_report(&reference, predicted, &delay_ref, &delay_pred, models)?)
}

fn strategy_csv_row(
    w: &mut dyn Write,
    name: &str,
    activation_ms: u64,
    s: &StrategyReport,
    models: &[EnergyModel],
    metrics: (f64, f64, f64),
) -> io::Result<()> {
    write!(w, "{name},{activation_ms}")?;
    for b in &s.energy.beta {
        write!(w, ",{}", b * 100.0)?;
    }
    for m in models {
        write!(w, ",{}", s.energy.rho[&m.name])?;
    }
    for m in models {
        write!(w, ",{}", s.relative_energy[&m.name])?;
    }
    writeln!(
        w,
        ",{},{},{},{},{},{}",
        s.avg_extra_delay_us, s.delayed_prbs, s.max_delay_ms, metrics.0, metrics.1, metrics.2
    )
}

/// One row per strategy. The reference row scores the reference against
/// itself.
pub fn write_evaluation_csv(
    w: &mut dyn Write,
    report: &CombinedReport,
    cell: &CellConfig,
    models: &[EnergyModel],
) -> anyhow::Result<()> {
    write!(w, "strategy,activation_ms")?;
    for b in &cell.bands {
        write!(w, ",sleep_pct_{}", b.label)?;
    }
    for m in models {
        write!(w, ",rho_{}", m.name)?;
    }
    for m in models {
        write!(w, ",relative_energy_{}", m.name)?;
    }
    writeln!(
        w,
        ",avg_extra_delay_us,delayed_prbs,max_delay_ms,rmse,accuracy,qos_preservation"
    )?;
    strategy_csv_row(
        w,
        "reference",
        report.activation_ms,
        &report.reference,
        models,
        (0.0, 1.0, 1.0),
    )?;
    let m = &report.metrics;
    strategy_csv_row(
        w,
        "predicted",
        report.activation_ms,
        &report.predicted,
        models,
        (m.rmse, m.accuracy, m.qos_preservation),
    )?;
    Ok(())
}

pub fn write_evaluation(
    report: &CombinedReport,
    cell: &CellConfig,
    models: &[EnergyModel],
    json: Option<&Path>,
    csv: Option<&Path>,
) -> anyhow::Result<()> {
    write_output(json, |w| write_json(w, report))?;
    if let Some(csv) = csv {
        write_file(csv, |w| write_evaluation_csv(w, report, cell, models))?;
    }
    Ok(())
}

/// One row of the granularity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub granularity: String,
    pub activation_ms: u64,
    pub strategy: String,
    pub sleep_pct: Vec<f64>,
    pub avg_sleep_pct: f64,
    pub rho: std::collections::BTreeMap<String, f64>,
    pub relative_energy: std::collections::BTreeMap<String, f64>,
    pub avg_extra_delay_us: f64,
}

impl SweepRow {
    fn new(g: &str, activation_ms: u64, strategy: &str, s: &StrategyReport) -> Self {
        let sleep_pct: Vec<f64> = s.energy.beta.iter().map(|b| b * 100.0).collect();
        Self {
            granularity: g.to_string(),
            activation_ms,
            strategy: strategy.to_string(),
            avg_sleep_pct: sleep_pct.iter().sum::<f64>() / sleep_pct.len() as f64,
            sleep_pct,
            rho: s.energy.rho.clone(),
            relative_energy: s.relative_energy.clone(),
            avg_extra_delay_us: s.avg_extra_delay_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub days: Vec<u32>,
    pub band_labels: Vec<String>,
    pub models: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Reference plans at every sweep granularity over `days`, plus any
/// evaluations supplied.
pub fn sweep(
    trace: &TraceSeries,
    granularities: &[Granularity],
    days: &[u32],
    evaluations: &[CombinedReport],
    models: &[EnergyModel],
) -> anyhow::Result<SweepReport> {
    let seg = single_segment(days)?;
    let mut rows = Vec::new();
    for &g in granularities {
        let cell = trace.cell().with_activation_ms(g.activation_ms())?;
        let retimed = TraceSeries::new(cell.clone(), trace.loads().clone())?;
        let per_day = periods_per_day(g.activation_ms())?;
        let full = plan_reference(&aggregate_theta(&retimed), &cell)?;
        let lo = seg.start as usize * per_day;
        let hi = seg.end as usize * per_day;
        anyhow::ensure!(
            hi <= full.len(),
            "days {}..{} lie outside the trace",
            seg.start,
            seg.end
        );
        let delay = simulate(&retimed, &full.slice(lo, hi), SimOptions::default())
            .with_context(|| format!("simulating the {g} reference"))?;
        rows.push(SweepRow::new(
            g.label(),
            g.activation_ms(),
            "reference",
            &StrategyReport::new(&delay, models)?,
        ));
        for e in evaluations.iter().filter(|e| e.activation_ms == g.activation_ms()) {
            rows.push(SweepRow::new(g.label(), g.activation_ms(), "predicted", &e.predicted));
        }
    }
    Ok(SweepReport {
        days: days.to_vec(),
        band_labels: trace.cell().bands.iter().map(|b| b.label.clone()).collect(),
        models: models.iter().map(|m| m.name.clone()).collect(),
        rows,
    })
}

fn write_sweep_csv(w: &mut dyn Write, report: &SweepReport) -> anyhow::Result<()> {
    write!(w, "granularity,activation_ms,strategy")?;
    for l in &report.band_labels {
        write!(w, ",sleep_pct_{l}")?;
    }
    write!(w, ",avg_sleep_pct")?;
    for m in &report.models {
        write!(w, ",rho_{m}")?;
    }
    for m in &report.models {
        write!(w, ",relative_energy_{m}")?;
    }
    writeln!(w, ",avg_extra_delay_us")?;
    for r in &report.rows {
        write!(w, "{},{},{}", r.granularity, r.activation_ms, r.strategy)?;
        for s in &r.sleep_pct {
            write!(w, ",{s}")?;
        }
        write!(w, ",{}", r.avg_sleep_pct)?;
        for m in &report.models {
            write!(w, ",{}", r.rho[m])?;
        }
        for m in &report.models {
            write!(w, ",{}", r.relative_energy[m])?;
        }
        writeln!(w, ",{}", r.avg_extra_delay_us)?;
    }
    Ok(())
}

/// Energy saving per granularity, one column per strategy and model.
fn write_energy_bars(w: &mut dyn Write, report: &SweepReport) -> anyhow::Result<()> {
    let strategies = ["reference", "predicted"];
    write!(w, "# granularity")?;
    for s in strategies {
        for m in &report.models {
            write!(w, " rho_{s}_{m}")?;
        }
    }
    writeln!(w)?;
    let mut seen = Vec::new();
    for r in &report.rows {
        if seen.contains(&r.granularity) {
            continue;
        }
        seen.push(r.granularity.clone());
        write!(w, "{}", r.granularity)?;
        for s in strategies {
            let row = report
                .rows
                .iter()
                .find(|x| x.granularity == r.granularity && x.strategy == s);
            for m in &report.models {
                match row {
                    Some(x) => write!(w, " {}", x.rho[m])?,
                    None => write!(w, " NaN")?,
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Relative energy against extra delay, one gnuplot data block per
/// strategy.
fn write_energy_delay(w: &mut dyn Write, report: &SweepReport, model: &str) -> anyhow::Result<()> {
    writeln!(w, "# avg_extra_delay_us relative_energy_{model} granularity")?;
    for (i, s) in ["reference", "predicted"].iter().enumerate() {
        if i > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# {s}")?;
        for r in report.rows.iter().filter(|r| r.strategy == *s) {
            writeln!(
                w,
                "{} {} {}",
                r.avg_extra_delay_us, r.relative_energy[model], r.granularity
            )?;
        }
    }
    Ok(())
}

/// Writes `sweep.csv`, `sweep.json`, `energy_bars.dat` and one
/// `energy_delay_<model>.dat` per model into `dir`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = vec![
        dir.join("sweep.csv"),
        dir.join("sweep.json"),
        dir.join("energy_bars.dat"),
    ];
    write_file(&written[0], |w| write_sweep_csv(w, report))?;
    write_file(&written[1], |w| write_json(w, report))?;
    write_file(&written[2], |w| write_energy_bars(w, report))?;
    for m in &report.models {
        let path = dir.join(format!("energy_delay_{m}.dat"));
        write_file(&path, |w| write_energy_delay(w, report, m))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

/// Selected days of `range`, checked against the trace length.
pub fn select_days(range: DayRange, weekends: bool, trace_days: u64) -> anyhow::Result<Vec<u32>> {
    anyhow::ensure!(
        range.end as u64 <= trace_days,
        "day range {range} exceeds the {trace_days} days of the trace"
    );
    let days = range.days(weekends);
    anyhow::ensure!(!days.is_empty(), "day range {range} selects no working days");
    Ok(days)
}

pub fn trace_days(trace: &TraceSeries) -> u64 {
    trace.len() / MS_PER_DAY
}
