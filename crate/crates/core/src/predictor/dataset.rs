use super::Normalization;
use crate::planner::BandPlan;
use crate::{Error, Result};

/// Sliding windows over a band-count series with the following value as target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub norm: Normalization,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window_k(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }
}

pub fn make_windows(plan: &BandPlan, k: usize, num_bands: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Validation("window length must be positive".into()));
    }
    if plan.len() <= k {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: plan.len(),
        });
    }
    plan.validate(num_bands)?;
    let norm = Normalization::for_bands(num_bands);
    let scaled: Vec<f64> = plan.counts.iter().map(|&n| norm.normalize(n)).collect();
    Ok(Dataset {
        inputs: scaled.windows(k).take(plan.len() - k).map(<[f64]>::to_vec).collect(),
        targets: scaled[k..].to_vec(),
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_count() {
        let plan = BandPlan::new(1, vec![1, 2, 3, 4, 1, 2, 3, 4, 1, 2]);
        assert_eq!(make_windows(&plan, 3, 4).unwrap().len(), 7);
    }

    #[test]
    fn endpoints() {
        let d = make_windows(&BandPlan::new(1, vec![1, 4]), 1, 4).unwrap();
        assert_eq!(d.inputs, vec![vec![0.0]]);
        assert_eq!(d.targets, vec![1.0]);
    }

    #[test]
    fn constant_plan() {
        let d = make_windows(&BandPlan::new(1, vec![2; 4]), 2, 4).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(d.inputs, vec![vec![third, third]; 2]);
        assert_eq!(d.targets, vec![third; 2]);
    }

    #[test]
    fn too_short() {
        let r = make_windows(&BandPlan::new(1, vec![1, 2, 3]), 3, 4);
        assert!(matches!(r, Err(Error::InsufficientHistory { .. })));
    }
}
