//! Replay of cell-wide demand against a band plan.
//!
//! Each TTI offers the capacity of the planned lowest bands. PRBs that do not
//! fit wait in a FIFO backlog and are served in later TTIs, oldest first; the
//! wait in milliseconds is their extra delay.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::planner::BandPlan;
use crate::runs::Runs;
use crate::trace::CellConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    /// Percentage of TTIs each band spends switched off.
    pub sleep_pct: Vec<f64>,
    pub avg_extra_delay_us: f64,
    pub total_prbs: u64,
    pub delayed_prbs: u64,
    pub max_delay_ms: u64,
    /// Served PRBs by delay in ms, including the undelayed ones under 0.
    /// Delays of [`HIST_EXACT_MS`] and more are binned by whole seconds,
    /// keyed by the bin's lower edge.
    #[serde(rename = "histogram")]
    pub delay_histogram: BTreeMap<u64, u64>,
    /// PRBs still queued when the demand ends.
    pub residual_backlog: u64,
    /// PRBs discarded by [`SimOptions::reset_backlog_each_period`].
    #[serde(default)]
    pub dropped_prbs: u64,
}

impl DelayReport {
    pub fn served_prbs(&self) -> u64 {
        self.delay_histogram.values().sum()
    }
}

/// Delays below this many ms get their own histogram entry.
pub const HIST_EXACT_MS: u64 = 60_000;

#[derive(Debug, Default)]
struct Tally {
    hist: BTreeMap<u64, u64>,
    /// ms·PRB
    delay_sum: u128,
    delayed: u64,
    max: u64,
}

impl Tally {
    fn add(&mut self, delay: u64, prbs: u64) {
        if prbs == 0 {
            return;
        }
        let key = if delay < HIST_EXACT_MS {
            delay
        } else {
            delay - delay % 1000
        };
        *self.hist.entry(key).or_default() += prbs;
        if delay > 0 {
            self.delay_sum += delay as u128 * prbs as u128;
            self.delayed += prbs;
            self.max = self.max.max(delay);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Discard the backlog at every activation period boundary instead of
    /// carrying it over.
    pub reset_backlog_each_period: bool,
}

pub fn simulate(demand: &Runs<u64>, plan: &BandPlan, cell: &CellConfig) -> Result<DelayReport> {
    simulate_with(demand, plan, cell, SimOptions::default())
}

pub fn simulate_with(demand: &Runs<u64>, plan: &BandPlan, cell: &CellConfig, opts: SimOptions) -> Result<DelayReport> {
    let period_ms = plan.activation_ms;
    if period_ms == 0 {
        return Err(Error::Contract("plan has a zero activation period".into()));
    }
    plan.validate(cell.num_bands())?;
    let full = plan.len() as u64 * period_ms;
    let len_ok = if plan.partial_tail && !plan.is_empty() {
        demand.len() > full - period_ms && demand.len() <= full
    } else {
        demand.len() == full
    };
    if !len_ok {
        return Err(Error::Contract(format!(
            "demand covers {} TTIs but the plan has {} periods of {period_ms} ms",
            demand.len(),
            plan.len()
        )));
    }
    let cell_cap = cell.total_prbs_per_tti();
    if let Some((v, _)) = demand.runs().iter().find(|(v, _)| *v > cell_cap) {
        return Err(Error::Contract(format!(
            "demand {v} exceeds cell capacity {cell_cap} per TTI"
        )));
    }

    let mut tally = Tally::default();
    // (arrival tti, PRBs still waiting)
    let mut queue: VecDeque<Pending> = VecDeque::new();
    let mut queued = 0u64;
    let mut dropped = 0u64;
    let mut tti = 0u64;

    for &(arrivals, count) in demand.runs() {
        let mut left = count;
        while left > 0 {
            let period = (tti / period_ms) as usize;
            if opts.reset_backlog_each_period && tti.is_multiple_of(period_ms) && queued > 0 {
                dropped += queued;
                queue.clear();
                queued = 0;
            }
            let cap = cell.capacity_of_lowest(plan.counts[period]);
            let chunk = left.min((period as u64 + 1) * period_ms - tti);
            let mut k = 0;
            while k < chunk {
                if queued == 0 && arrivals <= cap {
                    // steady state: everything served on arrival
                    tally.add(0, arrivals * (chunk - k));
                    break;
                }
                let now = tti + k;
                if arrivals > 0 {
                    match queue.back_mut() {
                        Some(back) if back.per_tti == arrivals && back.start + back.ttis == now => back.ttis += 1,
                        _ => queue.push_back(Pending {
                            start: now,
                            ttis: 1,
                            per_tti: arrivals,
                            head: arrivals,
                        }),
                    }
                    queued += arrivals;
                }
                let mut free = cap;
                while free > 0 {
                    let Some(front) = queue.front_mut() else { break };
                    let served = front.serve(now, free, &mut tally);
                    free -= served;
                    queued -= served;
                    if front.ttis == 0 {
                        queue.pop_front();
                    }
                }
                k += 1;
            }
            tti += chunk;
            left -= chunk;
        }
    }
    let total_prbs = demand.sum();
    let avg_extra_delay_us = if total_prbs > 0 {
        1000.0 * tally.delay_sum as f64 / total_prbs as f64
    } else {
        0.0
    };
    Ok(DelayReport {
        sleep_pct: tti_weighted_sleep(plan, demand.len(), cell.num_bands()),
        avg_extra_delay_us,
        total_prbs,
        delayed_prbs: tally.delayed,
        max_delay_ms: tally.max,
        delay_histogram: tally.hist,
        residual_backlog: queued,
        dropped_prbs: dropped,
    })
}

/// Queued PRBs that arrived in TTIs `start..start + ttis`, `per_tti` in
/// each, of which only `head` remain from the first.
#[derive(Debug)]
struct Pending {
    start: u64,
    ttis: u64,
    per_tti: u64,
    head: u64,
}

impl Pending {
    /// Serves up to `free` PRBs oldest first at TTI `now`; returns how many.
    fn serve(&mut self, now: u64, free: u64, tally: &mut Tally) -> u64 {
        let mut served = 0;
        while self.ttis > 0 && served < free {
            let take = self.head.min(free - served);
            tally.add(now - self.start, take);
            served += take;
            self.head -= take;
            if self.head == 0 {
                self.start += 1;
                self.ttis -= 1;
                self.head = self.per_tti;
            }
        }
        served
    }
}

fn tti_weighted_sleep(plan: &BandPlan, ttis: u64, num_bands: usize) -> Vec<f64> {
    let mut asleep = vec![0u64; num_bands];
    for (i, &n) in plan.counts.iter().enumerate() {
        let start = i as u64 * plan.activation_ms;
        let span = ttis.saturating_sub(start).min(plan.activation_ms);
        for slot in asleep.iter_mut().skip(n) {
            *slot += span;
        }
    }
    asleep
        .into_iter()
        .map(|s| if ttis == 0 { 0.0 } else { 100.0 * s as f64 / ttis as f64 })
        .collect()
}

/// Percentage of activation periods in which each band is off
/// (band `f` sleeps whenever fewer than `f` bands are planned).
pub fn sleep_percentages(plan: &BandPlan, num_bands: usize) -> Vec<f64> {
    if plan.is_empty() {
        return vec![0.0; num_bands];
    }
    (1..=num_bands)
        .map(|f| {
            let off = plan.counts.iter().filter(|&&n| n < f).count();
            100.0 * off as f64 / plan.len() as f64
        })
        .collect()
}
