//! Stacked-LSTM forecaster for the next activation period's band count.
//!
//! Band counts are scaled to `[0, 1]` with `(n - 1) / (F - 1)`; the network
//! regresses the next scaled count and predictions are rounded half-up back to
//! `1..=F`.

mod checkpoint;
mod dataset;
mod dd;
mod forecast;
mod gradcheck;
mod lstm;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use dataset::{make_windows, Dataset};
pub use forecast::{baseline_persistence, count_from_estimate, predict_series, PredictionSeries};
pub use gradcheck::{gradient_check, gradient_check_with, squared_error_gradient, FD_STEP};
pub use lstm::{Dense, LstmLayer, LstmModel};
pub use train::{train, TrainReport};

use serde::{Deserialize, Serialize};

use crate::planner::Granularity;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub batch_size: usize,
    /// Past periods fed to the network.
    pub window_k: usize,
    pub seed: u64,
    /// Trailing fraction of the samples held out for validation.
    pub val_split: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 100,
            hidden_size: 256,
            num_layers: 6,
            batch_size: 16,
            window_k: 12,
            seed: 0,
            val_split: 0.2,
        }
    }
}

impl Hyperparams {
    /// Training presets: 6 LSTM layers of 256 units, learning
    /// rate 1e-4, 100 epochs (150 at one hour) and a batch size that
    /// shrinks as the activation period grows. Sub-minute periods have no
    /// preset.
    pub fn for_granularity(g: Granularity) -> Result<Self> {
        let (epochs, batch_size) = match g {
            Granularity::M1 => (100, 72),
            Granularity::M3 => (100, 16),
            Granularity::M10 => (100, 16),
            Granularity::M30 => (100, 2),
            Granularity::H1 => (150, 2),
            Granularity::Ms20 | Granularity::S1 => {
                return Err(Error::Validation(format!("no training preset for {g}")))
            }
        };
        Ok(Self {
            epochs,
            batch_size,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.num_layers == 0 || self.batch_size == 0 || self.window_k == 0 {
            return Err(Error::Validation(
                "hidden size, layers, batch size and window must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_split) {
            return Err(Error::Validation("validation split must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Affine map between band counts and network values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
    pub num_bands: usize,
}

impl Normalization {
    pub fn for_bands(num_bands: usize) -> Self {
        Self {
            offset: 1.0,
            scale: num_bands.saturating_sub(1).max(1) as f64,
            num_bands,
        }
    }

    pub fn normalize(&self, count: usize) -> f64 {
        (count as f64 - self.offset) / self.scale
    }

    pub fn denormalize(&self, value: f64) -> f64 {
        value * self.scale + self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let hp = Hyperparams::for_granularity(Granularity::H1).unwrap();
        assert_eq!(
            (hp.epochs, hp.batch_size, hp.hidden_size, hp.num_layers),
            (150, 2, 256, 6)
        );
        assert_eq!(hp.learning_rate, 1e-4);
        assert_eq!(Hyperparams::for_granularity(Granularity::M1).unwrap().batch_size, 72);
        assert!(Hyperparams::for_granularity(Granularity::S1).is_err());
    }

    #[test]
    fn normalization_endpoints() {
        let n = Normalization::for_bands(4);
        assert_eq!(n.normalize(1), 0.0);
        assert_eq!(n.normalize(4), 1.0);
        assert_eq!(n.denormalize(1.0 / 3.0), 2.0);
        assert_eq!(Normalization::for_bands(1).normalize(1), 0.0);
    }
}
