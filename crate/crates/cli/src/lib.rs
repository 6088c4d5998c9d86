//! Library side of the `bandsleep` command: stage functions, day handling
//! and the end-to-end pipeline.

pub mod days;
pub mod output;
pub mod pipeline;
pub mod stages;

/// Environment variable consulted when `--seed` is not given.
pub const SEED_ENV: &str = "BANDSLEEP_SEED";
