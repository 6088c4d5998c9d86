use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use bandsleep_cli::days::DayRange;
use bandsleep_cli::output::write_output;
use bandsleep_cli::pipeline::{hyperparams_for, run_pipeline, HyperparamOverrides, RunConfig};
use bandsleep_cli::stages;
use bandsleep_cli::SEED_ENV;
use bandsleep_core::planner::Granularity;
use bandsleep_core::sim::SimOptions;
use bandsleep_core::synth::SynthParams;
use bandsleep_core::trace::TraceFormat;
use clap::{Args, Parser, Subcommand};

/// Sleep-mode planning for multi-band LTE base stations.
#[derive(Parser)]
#[command(name = "bandsleep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CellArg {
    /// Cell description (JSON). Defaults to the built-in four-band cell.
    #[arg(long)]
    cell: Option<PathBuf>,
    /// Activation period.
    #[arg(long, short, default_value = "10m")]
    granularity: Granularity,
}

#[derive(Args, Clone)]
struct SeedArg {
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 14)]
    days: u32,
    #[arg(long, default_value_t = 0.8)]
    peak: f64,
    #[arg(long, default_value_t = 0.05)]
    trough: f64,
    /// Expected bursts per hour.
    #[arg(long, default_value_t = 120.0)]
    burst_rate: f64,
    #[arg(long, default_value_t = 2.0)]
    burst_scale: f64,
}

impl SynthArgs {
    fn params(&self, seed: u64) -> SynthParams {
        SynthParams {
            days: self.days,
            peak_load: self.peak,
            trough_load: self.trough,
            burst_rate: self.burst_rate,
            burst_scale: self.burst_scale,
            seed,
        }
    }
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Past periods fed to the network.
    #[arg(long)]
    window_k: Option<usize>,
    /// Trailing fraction of training samples held out.
    #[arg(long)]
    val_split: Option<f64>,
}

impl OverrideArgs {
    fn overrides(&self) -> HyperparamOverrides {
        HyperparamOverrides {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            hidden_size: self.hidden_size,
            num_layers: self.num_layers,
            batch_size: self.batch_size,
            window_k: self.window_k,
            val_split: self.val_split,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic trace.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        cell: Option<PathBuf>,
        /// One row per TTI and band instead of run-length rows.
        #[arg(long)]
        per_tti: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compute the required band count of every activation period.
    Plan {
        #[command(flatten)]
        cell: CellArg,
        /// Trace CSV; stdin when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Replay a trace against a plan and report sleep time and extra delay.
    Simulate {
        #[command(flatten)]
        cell: CellArg,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Drop the backlog at every activation period boundary.
        #[arg(long)]
        reset_backlog: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Train the band-count forecaster on a reference plan.
    Train {
        #[command(flatten)]
        cell: CellArg,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value = "0..5")]
        train_range: DayRange,
        #[arg(long)]
        include_weekends: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Checkpoint path.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Forecast the band counts of the test days.
    Predict {
        #[command(flatten)]
        cell: CellArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Reference plan supplying the observed history.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "7..9")]
        test_range: DayRange,
        #[arg(long)]
        include_weekends: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare a predicted plan with the reference on accuracy, energy and delay.
    Evaluate {
        #[command(flatten)]
        cell: CellArg,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
        /// JSON report; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep activation periods and write tables and plot data.
    Report {
        #[arg(long)]
        cell: Option<PathBuf>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "7..9")]
        days: DayRange,
        #[arg(long)]
        include_weekends: bool,
        /// Evaluation JSON files to include as predicted rows.
        #[arg(long = "evaluation")]
        evaluations: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
    /// Run every stage into one directory and write a manifest.
    Run {
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
        #[command(flatten)]
        cell: CellArg,
        /// Use this trace instead of synthesizing one.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value = "0..5")]
        train_range: DayRange,
        #[arg(long, default_value = "7..9")]
        test_range: DayRange,
        #[arg(long)]
        include_weekends: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Plan { .. } => "plan",
            Command::Simulate { .. } => "simulate",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
            Command::Run { .. } => "run",
        }
    }
}

fn warn_indicative(g: Granularity) {
    if g.indicative_only() {
        eprintln!("warning: {g} activation periods are indicative only and not usable in practice");
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth {
            synth,
            seed,
            cell,
            per_tti,
            output,
        } => {
            let cell = stages::load_cell(cell.as_deref(), Granularity::M10)?;
            let format = if per_tti {
                TraceFormat::PerTti
            } else {
                TraceFormat::Runs
            };
            stages::synth(&synth.params(seed.seed), &cell, format, output.as_deref())
        }
        Command::Plan { cell, trace, output } => {
            warn_indicative(cell.granularity);
            let c = stages::load_cell(cell.cell.as_deref(), cell.granularity)?;
            let trace = stages::load_trace(trace.as_deref(), &c)?;
            stages::plan(&trace, output.as_deref())?;
            Ok(())
        }
        Command::Simulate {
            cell,
            trace,
            plan,
            reset_backlog,
            output,
        } => {
            let c = stages::load_cell(cell.cell.as_deref(), cell.granularity)?;
            let trace = stages::load_trace(Some(&trace), &c)?;
            let plan = stages::load_plan(&plan, c.activation_ms)?.plan;
            let opts = SimOptions {
                reset_backlog_each_period: reset_backlog,
            };
            let report = stages::simulate(&trace, &plan, opts)?;
            write_output(output.as_deref(), |w| bandsleep_cli::output::write_json(w, &report))
        }
        Command::Train {
            cell,
            plan,
            seed,
            train_range,
            include_weekends,
            overrides,
            output,
        } => {
            let c = stages::load_cell(cell.cell.as_deref(), cell.granularity)?;
            let hp = hyperparams_for(cell.granularity, &overrides.overrides(), seed.seed)?;
            let plan = stages::load_plan(&plan, c.activation_ms)?.plan;
            let per_day = stages::periods_per_day(c.activation_ms)? as u64;
            let days = stages::select_days(train_range, include_weekends, plan.len() as u64 / per_day)?;
            let summary = stages::train_model(&plan, &days, &hp, c.num_bands(), &output)?;
            eprintln!(
                "trained on {} samples; final train RMSE {:.6}{}",
                summary.samples,
                summary.train_loss.last().copied().unwrap_or(f64::NAN),
                summary
                    .val_loss
                    .last()
                    .map(|v| format!(", validation RMSE {v:.6}"))
                    .unwrap_or_default()
            );
            Ok(())
        }
        Command::Predict {
            cell,
            checkpoint,
            plan,
            test_range,
            include_weekends,
            output,
        } => {
            let c = stages::load_cell(cell.cell.as_deref(), cell.granularity)?;
            let plan = stages::load_plan(&plan, c.activation_ms)?.plan;
            let per_day = stages::periods_per_day(c.activation_ms)? as u64;
            let days = stages::select_days(test_range, include_weekends, plan.len() as u64 / per_day)?;
            stages::predict(&checkpoint, &plan, &days, output.as_deref())?;
            Ok(())
        }
        Command::Evaluate {
            cell,
            trace,
            reference,
            predicted,
            output,
            csv,
        } => {
            let c = stages::load_cell(cell.cell.as_deref(), cell.granularity)?;
            let trace = stages::load_trace(Some(&trace), &c)?;
            let reference = stages::load_plan(&reference, c.activation_ms)?.plan;
            let predicted = stages::load_plan(&predicted, c.activation_ms)?.plan;
            let models = stages::default_models(&c);
            let report = stages::evaluate(&trace, &reference, &predicted, &models)?;
            stages::write_evaluation(&report, &c, &models, output.as_deref(), csv.as_deref())
        }
        Command::Report {
            cell,
            trace,
            days,
            include_weekends,
            evaluations,
            out_dir,
        } => {
            let c = stages::load_cell(cell.as_deref(), Granularity::M1)?;
            let trace = stages::load_trace(Some(&trace), &c)?;
            let days = stages::select_days(days, include_weekends, stages::trace_days(&trace))?;
            let evaluations = evaluations
                .iter()
                .map(|p| stages::read_json(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let models = stages::default_models(&c);
            let sweep = stages::sweep(&trace, &Granularity::SWEEP, &days, &evaluations, &models)?;
            for path in stages::write_sweep(&sweep, &out_dir)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Run {
            out_dir,
            cell,
            trace,
            seed,
            synth,
            train_range,
            test_range,
            include_weekends,
            overrides,
        } => {
            let mut config = RunConfig::new(out_dir, seed.seed);
            config.cell = cell.cell;
            config.granularity = cell.granularity;
            config.trace = trace;
            config.synth = synth.params(seed.seed);
            config.train_days = train_range;
            config.test_days = test_range;
            config.include_weekends = include_weekends;
            config.hyperparams = overrides.overrides();
            let manifest = run_pipeline(&config)?;
            eprintln!(
                "pipeline complete: {} stages, manifest in {}",
                manifest.stages.len(),
                config.out_dir.join("manifest.json").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.name();
    match execute(cli.command).with_context(|| format!("{stage} failed")) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
