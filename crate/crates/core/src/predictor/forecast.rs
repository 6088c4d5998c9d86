use serde::{Deserialize, Serialize};

use super::lstm::LstmModel;
use crate::planner::BandPlan;
use crate::{Error, Result};

/// One-step-ahead predictions for consecutive target periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    /// Index into the history of the first predicted period.
    pub start: usize,
    pub counts: Vec<usize>,
    /// Unrounded estimates in band units.
    pub raw: Vec<f64>,
}

impl PredictionSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The predictions as a plan aligned with `history`.
    pub fn to_plan(&self, history: &BandPlan) -> BandPlan {
        BandPlan {
            activation_ms: history.activation_ms,
            start_period: history.start_period + self.start as u64,
            counts: self.counts.clone(),
            partial_tail: false,
        }
    }
}

/// Rounds half-up and clamps to `1..=num_bands`.
pub fn count_from_estimate(estimate: f64, num_bands: usize) -> usize {
    let rounded = (estimate + 0.5).floor();
    if rounded.is_nan() || rounded < 1.0 {
        1
    } else {
        (rounded as usize).min(num_bands.max(1))
    }
}

fn check_targets(history: &BandPlan, start: usize, horizon: usize, min_start: usize) -> Result<()> {
    if start < min_start || history.len() < min_start {
        return Err(Error::InsufficientHistory {
            needed: min_start,
            available: start.min(history.len()),
        });
    }
    if start + horizon > history.len() + 1 {
        return Err(Error::Contract(format!(
            "targets {start}..{} reach beyond the next unseen period {}",
            start + horizon,
            history.len()
        )));
    }
    Ok(())
}

/// Predicts periods `start..start + horizon` of `history`, each from the true
/// `window_k` periods before it. A target equal to `history.len()` is the next,
/// not yet observed, period.
pub fn predict_series(model: &LstmModel, history: &BandPlan, start: usize, horizon: usize) -> Result<PredictionSeries> {
    let k = model.window_k;
    check_targets(history, start, horizon, k)?;
    let norm = model.norm;
    let scaled: Vec<f64> = history.counts.iter().map(|&n| norm.normalize(n)).collect();
    let mut out = PredictionSeries {
        start,
        counts: Vec::with_capacity(horizon),
        raw: Vec::with_capacity(horizon),
    };
    for target in start..start + horizon {
        let estimate = norm.denormalize(model.forward(&scaled[target - k..target])?);
        out.raw.push(estimate);
        out.counts.push(count_from_estimate(estimate, norm.num_bands));
    }
    Ok(out)
}

/// Predicts each period as a copy of the one before it.
pub fn baseline_persistence(history: &BandPlan, start: usize, horizon: usize) -> Result<PredictionSeries> {
    if history.is_empty() {
        return Err(Error::InsufficientHistory {
            needed: 1,
            available: 0,
        });
    }
    check_targets(history, start, horizon, 1)?;
    let counts: Vec<usize> = (start..start + horizon).map(|t| history.counts[t - 1]).collect();
    Ok(PredictionSeries {
        start,
        raw: counts.iter().map(|&n| n as f64).collect(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::accuracy;
    use crate::predictor::Normalization;

    #[test]
    fn rounding_and_clamping() {
        assert_eq!(count_from_estimate(2.4, 4), 2);
        assert_eq!(count_from_estimate(2.5, 4), 3);
        assert_eq!(count_from_estimate(4.7, 4), 4);
        assert_eq!(count_from_estimate(0.2, 4), 1);
        assert_eq!(count_from_estimate(-3.0, 4), 1);
        assert_eq!(count_from_estimate(f64::NAN, 4), 1);
    }

    #[test]
    fn perfect_model_on_constant_plan() {
        // zero network outputs 0, i.e. one band after denormalization
        let m = LstmModel::zeros(3, 2, 1, Normalization::for_bands(4));
        let mut constant = m.clone();
        // bias = normalized 3 bands
        constant.head.bias = 2.0 / 3.0;
        let plan = BandPlan::new(60_000, vec![3; 10]);
        let p = predict_series(&constant, &plan, 3, 8).unwrap();
        assert_eq!(p.counts, vec![3; 8]);
        assert_eq!(predict_series(&m, &plan, 3, 1).unwrap().counts, vec![1]);
    }

    #[test]
    fn history_limits() {
        let m = LstmModel::zeros(3, 2, 1, Normalization::for_bands(4));
        let plan = BandPlan::new(1, vec![1, 2, 3]);
        assert!(predict_series(&m, &plan, 2, 1).is_err());
        assert_eq!(predict_series(&m, &plan, 3, 1).unwrap().len(), 1);
        assert!(predict_series(&m, &plan, 3, 2).is_err());
        let short = BandPlan::new(1, vec![1, 2]);
        assert!(matches!(
            predict_series(&m, &short, 3, 0),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn persistence_examples() {
        let p = baseline_persistence(&BandPlan::new(1, vec![1, 2, 3]), 3, 1).unwrap();
        assert_eq!(p.counts, vec![3]);

        let constant = BandPlan::new(1, vec![2; 8]);
        let p = baseline_persistence(&constant, 1, 7).unwrap();
        assert_eq!(accuracy(&p.counts, &constant.counts[1..]).unwrap(), 1.0);

        let alternating = BandPlan::new(1, (0..8).map(|i| 1 + i % 2).collect());
        let p = baseline_persistence(&alternating, 1, 7).unwrap();
        assert_eq!(accuracy(&p.counts, &alternating.counts[1..]).unwrap(), 0.0);

        assert!(baseline_persistence(&BandPlan::new(1, vec![]), 0, 1).is_err());
    }

    #[test]
    fn plan_alignment() {
        let mut history = BandPlan::new(600_000, vec![1; 20]);
        history.start_period = 100;
        let p = baseline_persistence(&history, 12, 8).unwrap();
        let plan = p.to_plan(&history);
        assert_eq!(plan.start_period, 112);
        assert_eq!(plan.len(), 8);
    }
}
