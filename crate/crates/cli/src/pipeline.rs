//! The full synth → plan → simulate → train → predict → evaluate → report
//! run with a manifest of every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bandsleep_core::planner::Granularity;
use bandsleep_core::predictor::Hyperparams;
use bandsleep_core::sim::SimOptions;
use bandsleep_core::synth::SynthParams;
use bandsleep_core::trace::TraceFormat;
use serde::{Deserialize, Serialize};

use crate::days::DayRange;
use crate::output::{sha256_bytes, sha256_file, write_file, write_json};
use crate::stages;

/// Optional replacements for the granularity's training preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperparamOverrides {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub hidden_size: Option<usize>,
    pub num_layers: Option<usize>,
    pub batch_size: Option<usize>,
    pub window_k: Option<usize>,
    pub val_split: Option<f64>,
}

impl HyperparamOverrides {
    pub fn apply(&self, mut hp: Hyperparams) -> Hyperparams {
        if let Some(v) = self.learning_rate {
            hp.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            hp.epochs = v;
        }
        if let Some(v) = self.hidden_size {
            hp.hidden_size = v;
        }
        if let Some(v) = self.num_layers {
            hp.num_layers = v;
        }
        if let Some(v) = self.batch_size {
            hp.batch_size = v;
        }
        if let Some(v) = self.window_k {
            hp.window_k = v;
        }
        if let Some(v) = self.val_split {
            hp.val_split = v;
        }
        hp
    }
}

/// Hyperparameters for `g`: its preset, the overrides, then `seed`.
pub fn hyperparams_for(g: Granularity, overrides: &HyperparamOverrides, seed: u64) -> anyhow::Result<Hyperparams> {
    let mut hp = overrides.apply(Hyperparams::for_granularity(g)?);
    hp.seed = seed;
    hp.validate()?;
    Ok(hp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Cell description; the built-in four-band cell when absent.
    pub cell: Option<PathBuf>,
    /// Input trace; synthesized from `synth` when absent.
    pub trace: Option<PathBuf>,
    pub granularity: Granularity,
    pub hyperparams: HyperparamOverrides,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub synth: SynthParams,
    pub train_days: DayRange,
    pub test_days: DayRange,
    pub include_weekends: bool,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            cell: None,
            trace: None,
            granularity: Granularity::M10,
            hyperparams: HyperparamOverrides::default(),
            out_dir: out_dir.into(),
            seed,
            synth: SynthParams {
                seed,
                ..SynthParams::default()
            },
            train_days: DayRange { start: 0, end: 5 },
            test_days: DayRange { start: 7, end: 9 },
            include_weekends: false,
        }
    }

    /// Digest of the config with the output directory left out, so the same
    /// run in two places hashes alike.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out_dir = PathBuf::new();
        sha256_bytes(&serde_json::to_vec(&canon).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// File name relative to the output directory, and its SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub granularity: Granularity,
    pub hyperparams: Hyperparams,
    pub train_days: Vec<u32>,
    pub test_days: Vec<u32>,
    pub stages: Vec<StageRecord>,
}

/// A failed stage and its cause.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

struct Recorder<'a> {
    dir: &'a Path,
    stages: Vec<StageRecord>,
}

impl Recorder<'_> {
    fn run<T>(
        &mut self,
        stage: &'static str,
        outputs: &[&str],
        body: impl FnOnce() -> anyhow::Result<T>,
    ) -> Result<T, StageError> {
        let wrap = |source| StageError { stage, source };
        let value = body().map_err(wrap)?;
        let mut record = StageRecord {
            name: stage.to_string(),
            outputs: BTreeMap::new(),
        };
        for name in outputs {
            let digest = sha256_file(&self.dir.join(name)).map_err(wrap)?;
            record.outputs.insert(name.to_string(), digest);
        }
        self.stages.push(record);
        Ok(value)
    }
}

/// File names inside the output directory.
pub mod files {
    pub const TRACE: &str = "trace.csv";
    pub const PLAN: &str = "plan.csv";
    pub const SIMULATION: &str = "simulation.json";
    pub const CHECKPOINT: &str = "model.json";
    pub const TRAINING: &str = "training.json";
    pub const PREDICTION: &str = "prediction.csv";
    pub const EVALUATION: &str = "evaluation.json";
    pub const EVALUATION_CSV: &str = "evaluation.csv";
    pub const REPORT_DIR: &str = "report";
    pub const MANIFEST: &str = "manifest.json";
}

/// Runs every stage in order. Each stage reads its inputs back from disk.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest, StageError> {
    let dir = config.out_dir.as_path();
    let setup = |source| StageError { stage: "setup", source };
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(setup)?;
    let g = config.granularity;
    let cell = stages::load_cell(config.cell.as_deref(), g).map_err(setup)?;
    let hp = hyperparams_for(g, &config.hyperparams, config.seed).map_err(setup)?;
    if config.train_days.overlaps(&config.test_days) {
        return Err(setup(anyhow::anyhow!(
            "train days {} overlap test days {}",
            config.train_days,
            config.test_days
        )));
    }
    let train_days = config.train_days.days(config.include_weekends);
    let test_days = config.test_days.days(config.include_weekends);
    let mut rec = Recorder {
        dir,
        stages: Vec::new(),
    };
    let path = |name: &str| dir.join(name);

    let trace_path = match &config.trace {
        Some(p) => p.clone(),
        None => {
            rec.run("synth", &[files::TRACE], || {
                let params = SynthParams {
                    seed: config.seed,
                    ..config.synth.clone()
                };
                stages::synth(&params, &cell, TraceFormat::Runs, Some(&path(files::TRACE)))
            })?;
            path(files::TRACE)
        }
    };

    rec.run("plan", &[files::PLAN], || {
        let trace = stages::load_trace(Some(&trace_path), &cell)?;
        let days = stages::trace_days(&trace);
        stages::select_days(config.train_days, config.include_weekends, days)?;
        stages::select_days(config.test_days, config.include_weekends, days)?;
        stages::plan(&trace, Some(&path(files::PLAN)))?;
        Ok(())
    })?;

    rec.run("simulate", &[files::SIMULATION], || {
        let trace = stages::load_trace(Some(&trace_path), &cell)?;
        let plan = stages::load_plan(&path(files::PLAN), cell.activation_ms)?.plan;
        let report = stages::simulate(&trace, &plan, SimOptions::default())?;
        write_file(&path(files::SIMULATION), |w| write_json(w, &report))
    })?;

    rec.run("train", &[files::CHECKPOINT, files::TRAINING], || {
        let plan = stages::load_plan(&path(files::PLAN), cell.activation_ms)?.plan;
        let summary = stages::train_model(&plan, &train_days, &hp, cell.num_bands(), &path(files::CHECKPOINT))?;
        write_file(&path(files::TRAINING), |w| write_json(w, &summary))
    })?;

    rec.run("predict", &[files::PREDICTION], || {
        let plan = stages::load_plan(&path(files::PLAN), cell.activation_ms)?.plan;
        stages::predict(
            &path(files::CHECKPOINT),
            &plan,
            &test_days,
            Some(&path(files::PREDICTION)),
        )?;
        Ok(())
    })?;

    let models = stages::default_models(&cell);
    rec.run("evaluate", &[files::EVALUATION, files::EVALUATION_CSV], || {
        let trace = stages::load_trace(Some(&trace_path), &cell)?;
        let reference = stages::load_plan(&path(files::PLAN), cell.activation_ms)?.plan;
        let predicted = stages::load_plan(&path(files::PREDICTION), cell.activation_ms)?.plan;
        let report = stages::evaluate(&trace, &reference, &predicted, &models)?;
        stages::write_evaluation(
            &report,
            &cell,
            &models,
            Some(&path(files::EVALUATION)),
            Some(&path(files::EVALUATION_CSV)),
        )
    })?;

    let report_dir = path(files::REPORT_DIR);
    let mut report_files = vec![
        format!("{}/sweep.csv", files::REPORT_DIR),
        format!("{}/sweep.json", files::REPORT_DIR),
        format!("{}/energy_bars.dat", files::REPORT_DIR),
    ];
    for m in &models {
        report_files.push(format!("{}/energy_delay_{}.dat", files::REPORT_DIR, m.name));
    }
    let report_refs: Vec<&str> = report_files.iter().map(String::as_str).collect();
    rec.run("report", &report_refs, || {
        let trace = stages::load_trace(Some(&trace_path), &cell)?;
        let evaluation = stages::read_json(&path(files::EVALUATION))?;
        let sweep = stages::sweep(&trace, &Granularity::SWEEP, &test_days, &[evaluation], &models)?;
        stages::write_sweep(&sweep, &report_dir)?;
        Ok(())
    })?;

    let mut seeds = BTreeMap::new();
    if config.trace.is_none() {
        seeds.insert("synth".to_string(), config.seed);
    }
    seeds.insert("train".to_string(), hp.seed);
    let manifest = Manifest {
        tool: "bandsleep".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config.hash(),
        seeds,
        granularity: g,
        hyperparams: hp,
        train_days,
        test_days,
        stages: rec.stages,
    };
    write_file(&path(files::MANIFEST), |w| write_json(w, &manifest)).map_err(|source| StageError {
        stage: "manifest",
        source,
    })?;
    Ok(manifest)
}
