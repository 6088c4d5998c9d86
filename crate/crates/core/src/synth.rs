//! Seeded synthetic traces with a diurnal load curve and short bursts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::runs::Runs;
use crate::trace::{CellConfig, TraceSeries};
use crate::{Error, Result, MS_PER_DAY};

const SECONDS_PER_DAY: u64 = 86_400;
const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub days: u32,
    /// Fraction of cell capacity demanded at the daily peak (hour 12).
    pub peak_load: f64,
    /// Fraction of cell capacity demanded at the daily trough (hour 0).
    pub trough_load: f64,
    /// Expected bursts per hour.
    pub burst_rate: f64,
    /// Demand multiplier during a burst.
    pub burst_scale: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            days: 14,
            peak_load: 0.8,
            trough_load: 0.05,
            burst_rate: 120.0,
            burst_scale: 2.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let idle = self.peak_load == 0.0 && self.trough_load == 0.0;
        if !idle && !(0.0 <= self.trough_load && self.trough_load < self.peak_load && self.peak_load <= 1.0) {
            return Err(Error::Validation(format!(
                "loads must satisfy 0 <= trough < peak <= 1, got trough {} peak {}",
                self.trough_load, self.peak_load
            )));
        }
        if !(self.burst_rate >= 0.0 && self.burst_rate.is_finite()) {
            return Err(Error::Validation("burst rate must be non-negative".into()));
        }
        if !(self.burst_scale >= 1.0 && self.burst_scale.is_finite()) {
            return Err(Error::Validation("burst scale must be at least 1".into()));
        }
        Ok(())
    }

    /// Load fraction at `hour` of the day: a raised cosine from trough at
    /// midnight to peak at noon.
    pub fn load_at_hour(&self, hour: f64) -> f64 {
        let swing = (self.peak_load - self.trough_load) / 2.0;
        self.trough_load + swing * (1.0 - (2.0 * std::f64::consts::PI * hour / 24.0).cos())
    }
}

/// Generates `days` of per-TTI allocations.
///
/// The diurnal level is evaluated once per second and held for its 1000
/// TTIs. Bursts arrive as a Poisson process, start on a reallocation window
/// boundary and last 1 to `realloc_ms` TTIs, so they never straddle two
/// windows. Demand is packed into the lowest bands first.
pub fn generate_trace(params: &SynthParams, cell: &CellConfig) -> Result<TraceSeries> {
    params.validate()?;
    let capacity = cell.total_prbs_per_tti();
    let horizon = params.days as u64 * MS_PER_DAY;

    let mut totals = Runs::new();
    for s in 0..params.days as u64 * SECONDS_PER_DAY {
        let hour = (s % SECONDS_PER_DAY) as f64 / 3600.0;
        let level = (params.load_at_hour(hour) * capacity as f64).round() as u64;
        totals.push(level.min(capacity), 1000);
    }

    let bursts = burst_intervals(params, cell.realloc_ms, horizon);
    let boost = |v: u64| ((v as f64 * params.burst_scale).round() as u64).min(capacity);
    let mut boosted = Runs::new();
    let mut next = 0usize;
    let mut pos = 0u64;
    for &(v, n) in totals.runs() {
        let (mut lo, hi) = (pos, pos + n);
        while lo < hi {
            while next < bursts.len() && bursts[next].1 <= lo {
                next += 1;
            }
            match bursts.get(next) {
                Some(&(start, end)) if start <= lo => {
                    let end = end.min(hi);
                    boosted.push(boost(v), end - lo);
                    lo = end;
                }
                Some(&(start, _)) if start < hi => {
                    boosted.push(v, start - lo);
                    lo = start;
                }
                _ => {
                    boosted.push(v, hi - lo);
                    lo = hi;
                }
            }
        }
        pos = hi;
    }

    let loads = boosted.map(|&total| pack_lowest_first(total, cell));
    TraceSeries::new(cell.clone(), loads)
}

/// Sorted, disjoint `[start, end)` burst intervals.
fn burst_intervals(params: &SynthParams, realloc_ms: u64, horizon: u64) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    if params.burst_rate == 0.0 || horizon == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let gap = Exp::new(params.burst_rate / MS_PER_HOUR).expect("positive rate");
    let mut t = 0.0f64;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon as f64 {
            break;
        }
        let start = (t as u64 / realloc_ms) * realloc_ms;
        let end = (start + rng.random_range(1..=realloc_ms)).min(horizon);
        match out.last_mut() {
            Some(last) if last.0 == start => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

/// Fills band 1 up to its capacity, then band 2, and so on.
pub fn pack_lowest_first(total: u64, cell: &CellConfig) -> Vec<u32> {
    let mut left = total;
    cell.bands
        .iter()
        .map(|b| {
            let take = left.min(b.prbs_per_tti as u64);
            left -= take;
            take as u32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{total_demand_per_tti, write_trace, TraceFormat};

    fn params(days: u32, seed: u64) -> SynthParams {
        SynthParams {
            days,
            seed,
            ..SynthParams::default()
        }
    }

    #[test]
    fn idle_cell_is_all_zero() {
        let cell = CellConfig::default_four_band();
        let p = SynthParams {
            days: 1,
            peak_load: 0.0,
            trough_load: 0.0,
            ..SynthParams::default()
        };
        let t = generate_trace(&p, &cell).unwrap();
        assert_eq!(t.len(), MS_PER_DAY);
        assert_eq!(total_demand_per_tti(&t).runs(), &[(0, MS_PER_DAY)]);
    }

    #[test]
    fn zero_days_is_empty() {
        let t = generate_trace(&params(0, 1), &CellConfig::default_four_band()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn deterministic_bytes() {
        let cell = CellConfig::default_four_band();
        let render = |seed| {
            let mut buf = Vec::new();
            write_trace(
                &mut buf,
                &generate_trace(&params(1, seed), &cell).unwrap(),
                TraceFormat::Runs,
            )
            .unwrap();
            buf
        };
        assert_eq!(render(3), render(3));
        assert_ne!(render(3), render(4));
    }

    #[test]
    fn profile_extrema() {
        let cell = CellConfig::default_four_band();
        let p = SynthParams {
            days: 1,
            peak_load: 1.0,
            trough_load: 0.05,
            burst_rate: 0.0,
            ..SynthParams::default()
        };
        let demand = total_demand_per_tti(&generate_trace(&p, &cell).unwrap());
        let noon = 12 * 3_600_000;
        assert_eq!(demand.slice(noon, noon + 1).to_vec(), vec![300]);
        assert_eq!(demand.slice(0, 1).to_vec(), vec![15]);
        let max = demand.runs().iter().map(|r| r.0).max().unwrap();
        let min = demand.runs().iter().map(|r| r.0).min().unwrap();
        assert_eq!((min, max), (15, 300));
    }

    #[test]
    fn demand_is_clamped_and_packed() {
        let cell = CellConfig::default_four_band();
        let p = SynthParams {
            days: 1,
            peak_load: 1.0,
            trough_load: 0.5,
            burst_rate: 3600.0,
            burst_scale: 4.0,
            seed: 9,
        };
        let t = generate_trace(&p, &cell).unwrap();
        for (alloc, _) in t.loads().runs() {
            let filled = alloc
                .iter()
                .zip(&cell.bands)
                .take_while(|(a, b)| **a == b.prbs_per_tti)
                .count();
            // at most one partially filled band, everything above it idle
            assert!(alloc.iter().skip(filled + 1).all(|&a| a == 0), "{alloc:?}");
        }
        assert_eq!(pack_lowest_first(120, &cell), vec![50, 70, 0, 0]);
        assert_eq!(pack_lowest_first(1000, &cell), vec![50, 100, 75, 75]);
    }

    #[test]
    fn bursts_stay_inside_one_window() {
        let p = SynthParams {
            burst_rate: 5000.0,
            ..params(1, 11)
        };
        let bursts = burst_intervals(&p, 20, MS_PER_DAY);
        assert!(!bursts.is_empty());
        for (s, e) in &bursts {
            assert_eq!(s % 20, 0);
            assert!(e - s >= 1 && e - s <= 20);
        }
        assert!(bursts.windows(2).all(|w| w[0].1 <= w[1].0));
    }

    #[test]
    fn daily_mean_within_bounds() {
        let cell = CellConfig::default_four_band();
        let p = params(1, 5);
        let demand = total_demand_per_tti(&generate_trace(&p, &cell).unwrap());
        let mean = demand.sum() as f64 / demand.len() as f64;
        let cap = cell.total_prbs_per_tti() as f64;
        assert!(mean >= p.trough_load * cap && mean <= p.peak_load * p.burst_scale * cap);
    }

    #[test]
    fn invalid_params() {
        let cell = CellConfig::default_four_band();
        for p in [
            SynthParams {
                trough_load: 0.9,
                peak_load: 0.5,
                ..params(1, 0)
            },
            SynthParams {
                peak_load: 1.5,
                ..params(1, 0)
            },
            SynthParams {
                burst_scale: 0.5,
                ..params(1, 0)
            },
            SynthParams {
                burst_rate: -1.0,
                ..params(1, 0)
            },
        ] {
            assert!(generate_trace(&p, &cell).is_err());
        }
    }
}
