//! WebAssembly bindings for the demo page in `www/`. Every export takes
//! plain numbers or JSON text and returns JSON text.

use std::collections::BTreeMap;

use bandsleep_core::metrics::{energy_saving, EnergyModel};
use bandsleep_core::planner::{plan_reference, Granularity};
use bandsleep_core::sim::simulate;
use bandsleep_core::synth::{generate_trace, SynthParams};
use bandsleep_core::trace::{aggregate_theta, total_demand_per_tti, CellConfig, TraceSeries};
use bandsleep_core::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MINUTE_MS: u64 = 60_000;

#[derive(Debug, Serialize)]
pub struct DayProfile {
    pub granularity: String,
    pub capacity_per_tti: u64,
    /// Band capacity thresholds per TTI: `Σ_{f≤n} A_f` for n = 1..F.
    pub band_capacity: Vec<u64>,
    /// Mean PRBs per TTI in each minute.
    pub demand_per_minute: Vec<f64>,
    /// Peak PRBs in any TTI of each minute.
    pub peak_per_minute: Vec<u64>,
    pub band_counts: Vec<usize>,
    pub sleep_pct: Vec<f64>,
    pub avg_extra_delay_us: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub granularity: String,
    pub sleep_pct: Vec<f64>,
    pub rho: BTreeMap<String, f64>,
    pub avg_extra_delay_us: f64,
}

fn params(peak: f64, trough: f64, burst_rate: f64, burst_scale: f64, seed: u64) -> SynthParams {
    SynthParams {
        days: 1,
        peak_load: peak,
        trough_load: trough,
        burst_rate,
        burst_scale,
        seed,
    }
}

fn one_day(p: &SynthParams) -> Result<(CellConfig, TraceSeries)> {
    let cell = CellConfig::default_four_band();
    let trace = generate_trace(p, &cell)?;
    Ok((cell, trace))
}

/// A synthetic day on the default cell, planned at `granularity`.
pub fn day_profile(p: &SynthParams, granularity: Granularity) -> Result<DayProfile> {
    let (cell, trace) = one_day(p)?;
    let cell = cell.with_activation_ms(granularity.activation_ms())?;
    let trace = TraceSeries::new(cell.clone(), trace.loads().clone())?;
    let demand = total_demand_per_tti(&trace);
    let plan = plan_reference(&aggregate_theta(&trace), &cell)?;
    let report = simulate(&demand, &plan, &cell)?;
    let (sums, _) = demand.fold_chunks(MINUTE_MS, 0u64, |acc, v, n| acc + v * n);
    let (peaks, _) = demand.fold_chunks(MINUTE_MS, 0u64, |acc, v, _| acc.max(*v));
    Ok(DayProfile {
        granularity: granularity.label().to_string(),
        capacity_per_tti: cell.total_prbs_per_tti(),
        band_capacity: (1..=cell.num_bands()).map(|n| cell.capacity_of_lowest(n)).collect(),
        demand_per_minute: sums.iter().map(|&s| s as f64 / MINUTE_MS as f64).collect(),
        peak_per_minute: peaks.to_vec(),
        band_counts: plan.counts,
        sleep_pct: report.sleep_pct,
        avg_extra_delay_us: report.avg_extra_delay_us,
    })
}

/// Sleep time, energy saving and extra delay of one synthetic day at every
/// activation period from one minute to one hour.
pub fn sweep(p: &SynthParams) -> Result<Vec<SweepPoint>> {
    let (cell, trace) = one_day(p)?;
    let demand = total_demand_per_tti(&trace);
    let theta = aggregate_theta(&trace);
    let models = EnergyModel::defaults_for(&cell);
    Granularity::SWEEP
        .iter()
        .map(|g| {
            let c = cell.with_activation_ms(g.activation_ms())?;
            let report = simulate(&demand, &plan_reference(&theta, &c)?, &c)?;
            let beta: Vec<f64> = report.sleep_pct.iter().map(|s| s / 100.0).collect();
            let rho = models
                .iter()
                .map(|m| Ok((m.name.clone(), energy_saving(&beta, m)?)))
                .collect::<Result<_>>()?;
            Ok(SweepPoint {
                granularity: g.label().to_string(),
                sleep_pct: report.sleep_pct,
                rho,
                avg_extra_delay_us: report.avg_extra_delay_us,
            })
        })
        .collect()
}

/// Energy saving for sleep fractions `beta` under power `weights`.
pub fn energy(beta: &[f64], weights: &[f64]) -> Result<f64> {
    energy_saving(beta, &EnergyModel::new("custom", weights.to_vec())?)
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

fn parse_list(json: &str) -> Result<Vec<f64>> {
    serde_json::from_str(json).map_err(Error::from)
}

#[wasm_bindgen(js_name = dayProfile)]
pub fn day_profile_js(
    peak: f64,
    trough: f64,
    burst_rate: f64,
    burst_scale: f64,
    seed: u32,
    granularity: &str,
) -> std::result::Result<String, JsError> {
    let g: Granularity = granularity.parse().map_err(|e: Error| JsError::new(&e.to_string()))?;
    to_js(day_profile(
        &params(peak, trough, burst_rate, burst_scale, seed.into()),
        g,
    ))
}

#[wasm_bindgen(js_name = sweep)]
pub fn sweep_js(
    peak: f64,
    trough: f64,
    burst_rate: f64,
    burst_scale: f64,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(sweep(&params(peak, trough, burst_rate, burst_scale, seed.into())))
}

/// `beta` and `weights` are JSON arrays of numbers.
#[wasm_bindgen(js_name = energySaving)]
pub fn energy_js(beta: &str, weights: &str) -> std::result::Result<f64, JsError> {
    parse_list(beta)
        .and_then(|b| energy(&b, &parse_list(weights)?))
        .map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> SynthParams {
        params(0.8, 0.05, 120.0, 2.0, 3)
    }

    #[test]
    fn profile_shape() {
        let p = day_profile(&demo(), Granularity::M10).unwrap();
        assert_eq!(p.band_counts.len(), 144);
        assert_eq!(p.demand_per_minute.len(), 1440);
        assert_eq!(p.band_capacity, vec![50, 150, 225, 300]);
        assert_eq!(p.sleep_pct[0], 0.0);
        assert!(p.peak_per_minute.iter().all(|&x| x <= p.capacity_per_tti));
        // quietest around midnight, busiest around noon
        assert!(p.demand_per_minute[720] > p.demand_per_minute[0]);
    }

    #[test]
    fn sweep_rows() {
        let rows = sweep(&demo()).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.granularity.as_str()).collect();
        assert_eq!(labels, ["1m", "3m", "10m", "30m", "1h"]);
        for pair in rows.windows(2) {
            assert!(pair[1].rho["model1"] <= pair[0].rho["model1"] + 1e-12);
        }
    }

    #[test]
    fn energy_values() {
        let rho = energy(&[0.0, 0.0, 0.1736, 0.3090], &[1.0, 2.0, 1.5, 1.5]).unwrap();
        assert!((rho - 0.12065).abs() < 1e-12);
        assert!(energy(&[0.5], &[1.0, 1.0]).is_err());
        assert_eq!(parse_list("[0.5, 1]").unwrap(), vec![0.5, 1.0]);
        assert!(parse_list("nope").is_err());
    }

    #[test]
    fn invalid_load_is_rejected() {
        assert!(sweep(&params(0.2, 0.5, 0.0, 1.0, 0)).is_err());
    }
}
