//! Prediction quality metrics and energy savings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::planner::BandPlan;
use crate::sim::DelayReport;
use crate::trace::CellConfig;
use crate::{Error, Result};

fn check_pair(pred: &[usize], actual: &[usize]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::Dimension {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Validation("cannot score an empty series".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[usize], actual: &[usize]) -> Result<f64> {
    check_pair(pred, actual)?;
    let sq: f64 = pred
        .iter()
        .zip(actual)
        .map(|(&p, &a)| (p as f64 - a as f64).powi(2))
        .sum();
    Ok((sq / actual.len() as f64).sqrt())
}

/// RMSE of real-valued estimates, e.g. the network output before rounding.
pub fn rmse_raw(pred: &[f64], actual: &[usize]) -> Result<f64> {
    if pred.len() != actual.len() || actual.is_empty() {
        return Err(Error::Dimension {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    let sq: f64 = pred.iter().zip(actual).map(|(&p, &a)| (p - a as f64).powi(2)).sum();
    Ok((sq / actual.len() as f64).sqrt())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], actual: &[usize]) -> Result<f64> {
    check_pair(pred, actual)?;
    let hits = pred.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// Fraction of periods where at least the required number of bands was
/// predicted.
pub fn qos_preservation(pred: &[usize], actual: &[usize]) -> Result<f64> {
    check_pair(pred, actual)?;
    let ok = pred.iter().zip(actual).filter(|(p, a)| p >= a).count();
    Ok(ok as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub accuracy: f64,
    pub qos_preservation: f64,
    pub n: usize,
    /// RMSE of the unrounded estimates, when available.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmse_raw: Option<f64>,
}

impl MetricReport {
    pub fn compute(pred: &[usize], actual: &[usize]) -> Result<Self> {
        Ok(Self {
            rmse: rmse(pred, actual)?,
            accuracy: accuracy(pred, actual)?,
            qos_preservation: qos_preservation(pred, actual)?,
            n: actual.len(),
            rmse_raw: None,
        })
    }
}

/// Relative power draw per band; only ratios matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub name: String,
    pub weights: Vec<f64>,
}

impl EnergyModel {
    pub fn new(name: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Validation("energy weights must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            weights,
        })
    }

    /// Every band draws the same power.
    pub fn equal(num_bands: usize) -> Self {
        Self::new("model1", vec![1.0; num_bands]).expect("positive weights")
    }

    /// Power proportional to bandwidth for the 10/20/15/15 MHz cell.
    pub fn bandwidth_proportional() -> Self {
        Self::new("model2", vec![1.0, 2.0, 1.5, 1.5]).expect("positive weights")
    }

    /// Weights taken from the cell configuration.
    pub fn from_cell(name: impl Into<String>, cell: &CellConfig) -> Self {
        Self::new(name, cell.bands.iter().map(|b| b.power_weight).collect()).expect("cell config validates weights")
    }

    /// `model1` (equal) and `model2` (the cell's own power weights).
    pub fn defaults_for(cell: &CellConfig) -> Vec<Self> {
        vec![Self::equal(cell.num_bands()), Self::from_cell("model2", cell)]
    }
}

/// `ρ = Σ β_f P_f / Σ P_f` with `β_f` the sleep fraction of band `f`.
pub fn energy_saving(beta: &[f64], model: &EnergyModel) -> Result<f64> {
    if beta.len() != model.weights.len() {
        return Err(Error::Dimension {
            expected: model.weights.len(),
            actual: beta.len(),
        });
    }
    if let Some(b) = beta.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(Error::Validation(format!("sleep fraction {b} outside [0, 1]")));
    }
    let saved: f64 = beta.iter().zip(&model.weights).map(|(b, p)| b * p).sum();
    Ok(saved / model.weights.iter().sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub beta: Vec<f64>,
    pub rho: BTreeMap<String, f64>,
}

impl EnergyReport {
    pub fn from_sleep_pct(sleep_pct: &[f64], models: &[EnergyModel]) -> Result<Self> {
        let beta: Vec<f64> = sleep_pct.iter().map(|p| p / 100.0).collect();
        let rho = models
            .iter()
            .map(|m| Ok((m.name.clone(), energy_saving(&beta, m)?)))
            .collect::<Result<_>>()?;
        Ok(Self { beta, rho })
    }
}

/// Energy and delay of one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub energy: EnergyReport,
    /// `1 - ρ` per energy model.
    pub relative_energy: BTreeMap<String, f64>,
    pub avg_extra_delay_us: f64,
    pub delayed_prbs: u64,
    pub max_delay_ms: u64,
}

impl StrategyReport {
    pub fn new(delay: &DelayReport, models: &[EnergyModel]) -> Result<Self> {
        let energy = EnergyReport::from_sleep_pct(&delay.sleep_pct, models)?;
        let relative_energy = energy.rho.iter().map(|(k, r)| (k.clone(), 1.0 - r)).collect();
        Ok(Self {
            energy,
            relative_energy,
            avg_extra_delay_us: delay.avg_extra_delay_us,
            delayed_prbs: delay.delayed_prbs,
            max_delay_ms: delay.max_delay_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub activation_ms: u64,
    pub metrics: MetricReport,
    pub reference: StrategyReport,
    pub predicted: StrategyReport,
}

/// Scores a predicted plan against the reference and summarizes both plans'
/// energy savings and extra delay.
pub fn build_report(
    ref_plan: &BandPlan,
    pred_plan: &BandPlan,
    delay_ref: &DelayReport,
    delay_pred: &DelayReport,
    models: &[EnergyModel],
) -> Result<CombinedReport> {
    if ref_plan.activation_ms != pred_plan.activation_ms {
        return Err(Error::ConfigMismatch(format!(
            "activation periods differ: {} vs {} ms",
            ref_plan.activation_ms, pred_plan.activation_ms
        )));
    }
    if ref_plan.start_period != pred_plan.start_period {
        return Err(Error::ConfigMismatch(format!(
            "plans start at different periods: {} vs {}",
            ref_plan.start_period, pred_plan.start_period
        )));
    }
    let bands = delay_ref.sleep_pct.len();
    if delay_pred.sleep_pct.len() != bands {
        return Err(Error::Dimension {
            expected: bands,
            actual: delay_pred.sleep_pct.len(),
        });
    }
    Ok(CombinedReport {
        activation_ms: ref_plan.activation_ms,
        metrics: MetricReport::compute(&pred_plan.counts, &ref_plan.counts)?,
        reference: StrategyReport::new(delay_ref, models)?,
        predicted: StrategyReport::new(delay_pred, models)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[2, 4], &[2, 3]).unwrap(), 0.5f64.sqrt());
        assert_eq!(accuracy(&[2, 4, 1, 3], &[2, 3, 1, 1]).unwrap(), 0.5);
        assert_eq!(accuracy(&[3, 3], &[3, 3]).unwrap(), 1.0);
        assert_eq!(qos_preservation(&[1, 4], &[2, 3]).unwrap(), 0.5);
        assert_eq!(qos_preservation(&[2, 1], &[2, 1]).unwrap(), 1.0);
    }

    #[test]
    fn metric_errors() {
        assert!(rmse(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
        assert!(qos_preservation(&[1, 2], &[1]).is_err());
        assert!(rmse_raw(&[1.0], &[]).is_err());
    }

    #[test]
    fn energy_examples() {
        let beta = [0.0, 0.0, 0.1736, 0.3090];
        let m1 = energy_saving(&beta, &EnergyModel::equal(4)).unwrap();
        let m2 = energy_saving(&beta, &EnergyModel::bandwidth_proportional()).unwrap();
        assert_relative_eq!(m1, 0.12065, epsilon = 1e-12);
        assert_relative_eq!(m2, 0.12065, epsilon = 1e-12);
        assert_eq!(energy_saving(&[0.0; 4], &EnergyModel::equal(4)).unwrap(), 0.0);
        assert!(energy_saving(&[0.0; 3], &EnergyModel::equal(4)).is_err());
        assert!(energy_saving(&[0.0, 1.2], &EnergyModel::equal(2)).is_err());
        assert!(EnergyModel::new("x", vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn default_models_follow_cell() {
        let models = EnergyModel::defaults_for(&CellConfig::default_four_band());
        assert_eq!(models[0].weights, vec![1.0; 4]);
        assert_eq!(models[1], EnergyModel::bandwidth_proportional());
    }

    fn report(sleep: Vec<f64>, delay: f64) -> DelayReport {
        DelayReport {
            sleep_pct: sleep,
            avg_extra_delay_us: delay,
            total_prbs: 0,
            delayed_prbs: 0,
            max_delay_ms: 0,
            delay_histogram: BTreeMap::new(),
            residual_backlog: 0,
            dropped_prbs: 0,
        }
    }

    #[test]
    fn perfect_prediction_report() {
        let plan = BandPlan::new(60_000, vec![1, 2, 4]);
        let d = report(vec![0.0, 33.3, 66.6, 66.6], 0.0);
        let models = EnergyModel::defaults_for(&CellConfig::default_four_band());
        let r = build_report(&plan, &plan, &d, &d, &models).unwrap();
        assert_eq!(r.reference, r.predicted);
        assert_eq!(r.metrics.accuracy, 1.0);
    }

    #[test]
    fn all_bands_on_saves_nothing() {
        let plan = BandPlan::new(60_000, vec![4, 4]);
        let d = report(vec![0.0; 4], 0.0);
        let models = EnergyModel::defaults_for(&CellConfig::default_four_band());
        let r = build_report(&plan, &plan, &d, &d, &models).unwrap();
        assert_eq!(r.reference.energy.rho["model1"], 0.0);
        assert_eq!(r.reference.relative_energy["model2"], 1.0);
    }

    #[test]
    fn inconsistent_inputs() {
        let a = BandPlan::new(60_000, vec![1, 2]);
        let b = BandPlan::new(180_000, vec![1, 2]);
        let d = report(vec![0.0; 4], 0.0);
        let models = [EnergyModel::equal(4)];
        assert!(build_report(&a, &b, &d, &d, &models).is_err());
        let c = BandPlan::new(60_000, vec![1]);
        assert!(build_report(&a, &c, &d, &d, &models).is_err());
        let short = report(vec![0.0; 3], 0.0);
        assert!(build_report(&a, &a, &d, &short, &models).is_err());
    }
}
