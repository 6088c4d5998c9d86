//! Reference band planning: how many of the lowest bands each activation
//! period needs so every reallocation window's demand fits.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::trace::{CellConfig, ThetaSeries};
use crate::{Error, Result};

/// Activation periods supported by the tooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "20ms")]
    Ms20,
    #[serde(rename = "1s")]
    S1,
    #[serde(rename = "1m")]
    M1,
    #[serde(rename = "3m")]
    M3,
    #[serde(rename = "10m")]
    M10,
    #[serde(rename = "30m")]
    M30,
    #[serde(rename = "1h")]
    H1,
}

impl Granularity {
    pub const ALL: [Granularity; 7] = [Self::Ms20, Self::S1, Self::M1, Self::M3, Self::M10, Self::M30, Self::H1];

    /// The practically usable periods, one minute and up.
    pub const SWEEP: [Granularity; 5] = [Self::M1, Self::M3, Self::M10, Self::M30, Self::H1];

    pub fn activation_ms(self) -> u64 {
        match self {
            Self::Ms20 => 20,
            Self::S1 => 1_000,
            Self::M1 => 60_000,
            Self::M3 => 180_000,
            Self::M10 => 600_000,
            Self::M30 => 1_800_000,
            Self::H1 => 3_600_000,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Ms20 => "20ms",
            Self::S1 => "1s",
            Self::M1 => "1m",
            Self::M3 => "3m",
            Self::M10 => "10m",
            Self::M30 => "30m",
            Self::H1 => "1h",
        }
    }

    /// Periods below the 80 ms system information broadcast interval, or
    /// too short to power a carrier up and down, are only indicative.
    pub fn indicative_only(self) -> bool {
        matches!(self, Self::Ms20 | Self::S1)
    }

    pub fn periods_per_day(self) -> u64 {
        crate::MS_PER_DAY / self.activation_ms()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.label() == s)
            .ok_or_else(|| Error::Validation(format!("unknown granularity {s:?}")))
    }
}

/// Window-total thresholds `S_j = δ · (A_1 + … + A_j)` for `j < F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thresholds {
    pub values: Vec<u64>,
    /// δ times the whole cell capacity; no valid window exceeds it.
    pub capacity: u64,
}

pub fn thresholds(cell: &CellConfig) -> Thresholds {
    let delta = cell.realloc_ms;
    let f = cell.num_bands();
    let values = (1..f).map(|j| delta * cell.capacity_of_lowest(j)).collect();
    Thresholds {
        values,
        capacity: delta * cell.total_prbs_per_tti(),
    }
}

/// Number of bands needed to carry `theta` PRBs in one reallocation window.
/// Upper bounds are inclusive: `theta == S_j` needs `j` bands.
pub fn required_bands_window(theta: u64, th: &Thresholds) -> Result<usize> {
    if theta > th.capacity {
        return Err(Error::Contract(format!(
            "window total {theta} exceeds cell capacity {}",
            th.capacity
        )));
    }
    Ok(th.values.partition_point(|&s| s < theta) + 1)
}

/// Required band count per activation period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandPlan {
    pub activation_ms: u64,
    /// Global index of `counts[0]`; non-zero for plans covering a sub-range.
    #[serde(default)]
    pub start_period: u64,
    pub counts: Vec<usize>,
    /// The last period covers fewer TTIs than `activation_ms`.
    #[serde(default)]
    pub partial_tail: bool,
}

impl BandPlan {
    pub fn new(activation_ms: u64, counts: Vec<usize>) -> Self {
        Self {
            activation_ms,
            start_period: 0,
            counts,
            partial_tail: false,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn validate(&self, num_bands: usize) -> Result<()> {
        match self.counts.iter().position(|&n| n == 0 || n > num_bands) {
            Some(i) => Err(Error::Validation(format!(
                "period {} requires {} bands, outside 1..={num_bands}",
                self.start_period + i as u64,
                self.counts[i]
            ))),
            None => Ok(()),
        }
    }

    /// Periods `[start, end)` relative to this plan.
    pub fn slice(&self, start: usize, end: usize) -> BandPlan {
        let end = end.min(self.len());
        let start = start.min(end);
        BandPlan {
            activation_ms: self.activation_ms,
            start_period: self.start_period + start as u64,
            counts: self.counts[start..end].to_vec(),
            partial_tail: self.partial_tail && end == self.len(),
        }
    }
}

/// Plans every activation period as the maximum band count over its
/// reallocation windows.
pub fn plan_reference(theta: &ThetaSeries, cell: &CellConfig) -> Result<BandPlan> {
    if theta.realloc_ms != cell.realloc_ms {
        return Err(Error::ConfigMismatch(format!(
            "window totals use {} ms windows, cell uses {} ms",
            theta.realloc_ms, cell.realloc_ms
        )));
    }
    let th = thresholds(cell);
    if let Some((v, _)) = theta.values.runs().iter().find(|(v, _)| *v > th.capacity) {
        return Err(Error::Contract(format!(
            "window total {v} exceeds cell capacity {}",
            th.capacity
        )));
    }
    let per_window = theta
        .values
        .map(|&v| required_bands_window(v, &th).expect("checked against capacity"));
    let (periods, partial) = per_window.fold_chunks(cell.windows_per_period(), 1usize, |acc, &n, _| acc.max(n));
    Ok(BandPlan {
        activation_ms: cell.activation_ms,
        start_period: 0,
        counts: periods.to_vec(),
        partial_tail: partial || theta.padded_tail,
    })
}

pub const PLAN_HEADER: &str = "period_index,n_bands";
pub const PREDICTION_HEADER: &str = "period_index,n_bands,raw";

/// Writes `period_index,n_bands`, or `period_index,n_bands,raw` when raw
/// network estimates are supplied.
pub fn write_plan<W: Write>(mut w: W, plan: &BandPlan, raw: Option<&[f64]>) -> Result<()> {
    match raw {
        Some(raw) => {
            if raw.len() != plan.len() {
                return Err(Error::Dimension {
                    expected: plan.len(),
                    actual: raw.len(),
                });
            }
            writeln!(w, "{PREDICTION_HEADER}")?;
            for (i, (n, r)) in plan.counts.iter().zip(raw).enumerate() {
                writeln!(w, "{},{n},{r}", plan.start_period + i as u64)?;
            }
        }
        None => {
            writeln!(w, "{PLAN_HEADER}")?;
            for (i, n) in plan.counts.iter().enumerate() {
                writeln!(w, "{},{n}", plan.start_period + i as u64)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub plan: BandPlan,
    pub raw: Option<Vec<f64>>,
}

/// Reads a plan CSV. Period indices must be consecutive.
pub fn read_plan<R: BufRead>(reader: R, activation_ms: u64) -> Result<PlanFile> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let with_raw = match header.trim_end() {
        PLAN_HEADER => false,
        PREDICTION_HEADER => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {other:?}, expected {PLAN_HEADER:?}"),
            })
        }
    };
    let mut plan = BandPlan::new(activation_ms, Vec::new());
    let mut raw = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if with_raw { 3 } else { 2 };
        let bad = |message: String| Error::Parse { line: line_no, message };
        if fields.len() != expected {
            return Err(bad(format!("expected {expected} columns, found {}", fields.len())));
        }
        let index: u64 = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad period index {:?}", fields[0])))?;
        let n: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad band count {:?}", fields[1])))?;
        if plan.counts.is_empty() {
            plan.start_period = index;
        } else if index != plan.start_period + plan.counts.len() as u64 {
            return Err(bad(format!("period index {index} is not consecutive")));
        }
        if n == 0 {
            return Err(bad("band count must be at least 1".into()));
        }
        plan.counts.push(n);
        if with_raw {
            raw.push(
                fields[2]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad raw value {:?}", fields[2])))?,
            );
        }
    }
    Ok(PlanFile {
        plan,
        raw: with_raw.then_some(raw),
    })
}
