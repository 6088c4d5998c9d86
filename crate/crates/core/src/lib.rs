//! Sleep-mode planning for multi-band cellular base stations.
//!
//! The pipeline works on per-TTI physical resource block (PRB) allocation
//! traces:
//!
//! 1. [`trace`] parses and aggregates traces into reallocation-window totals.
//! 2. [`planner`] turns window totals into the number of bands each
//!    activation period needs.
//! 3. [`sim`] replays the cell-wide demand against a plan with a FIFO backlog
//!    and measures the extra delay caused by switching bands off.
//! 4. [`predictor`] forecasts band counts with a stacked LSTM trained from
//!    scratch.
//! 5. [`metrics`] scores predictions and converts sleep time into energy
//!    savings.
//!
//! [`synth`] generates seeded diurnal traces for testing without captured data.

pub mod error;
pub mod metrics;
pub mod planner;
pub mod predictor;
pub mod runs;
pub mod sim;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use planner::{BandPlan, Granularity, Thresholds};
pub use runs::Runs;
pub use sim::{DelayReport, SimOptions};
pub use trace::{BandConfig, CellConfig, ThetaSeries, TraceSeries, TtiLoad};

/// Duration of one LTE subframe in milliseconds.
pub const TTI_MS: u64 = 1;

/// Milliseconds (TTIs) per day.
pub const MS_PER_DAY: u64 = 86_400_000;
