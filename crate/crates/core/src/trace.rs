//! Trace data model, CSV ingestion and window aggregation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::runs::Runs;
use crate::{Error, Result};

/// One carrier of the cell. Bands are numbered from 1 (lowest frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    #[serde(skip)]
    pub band_id: usize,
    pub label: String,
    pub prbs_per_tti: u32,
    pub power_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCellConfig")]
pub struct CellConfig {
    pub bands: Vec<BandConfig>,
    pub realloc_ms: u64,
    pub activation_ms: u64,
}

#[derive(Deserialize)]
struct RawCellConfig {
    bands: Vec<BandConfig>,
    realloc_ms: u64,
    activation_ms: u64,
}

impl TryFrom<RawCellConfig> for CellConfig {
    type Error = Error;

    fn try_from(raw: RawCellConfig) -> Result<Self> {
        CellConfig::new(raw.bands, raw.realloc_ms, raw.activation_ms)
    }
}

impl CellConfig {
    /// Builds a validated config, numbering the bands 1..=F in the given order.
    pub fn new(mut bands: Vec<BandConfig>, realloc_ms: u64, activation_ms: u64) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Validation("cell has no bands".into()));
        }
        for (i, b) in bands.iter_mut().enumerate() {
            b.band_id = i + 1;
            if b.prbs_per_tti == 0 {
                return Err(Error::Validation(format!("band {} has zero PRBs per TTI", b.label)));
            }
            if !(b.power_weight > 0.0 && b.power_weight.is_finite()) {
                return Err(Error::Validation(format!(
                    "band {} power weight must be positive",
                    b.label
                )));
            }
        }
        for (i, a) in bands.iter().enumerate() {
            if bands[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::Validation(format!("duplicate band label {}", a.label)));
            }
        }
        let cell = Self {
            bands,
            realloc_ms,
            activation_ms,
        };
        cell.check_periods()?;
        Ok(cell)
    }

    fn check_periods(&self) -> Result<()> {
        if self.realloc_ms == 0 || self.activation_ms == 0 {
            return Err(Error::Validation("periods must be positive".into()));
        }
        if !self.activation_ms.is_multiple_of(self.realloc_ms) {
            return Err(Error::Validation(format!(
                "activation period {} ms is not a multiple of the reallocation period {} ms",
                self.activation_ms, self.realloc_ms
            )));
        }
        Ok(())
    }

    /// The measured four-band cell: 800/1800/2100/2600 MHz carriers of
    /// 10/20/15/15 MHz, power weights proportional to bandwidth, 20 ms
    /// reallocation and 10 min activation periods.
    pub fn default_four_band() -> Self {
        let band = |label: &str, prbs, w| BandConfig {
            band_id: 0,
            label: label.to_string(),
            prbs_per_tti: prbs,
            power_weight: w,
        };
        Self::new(
            vec![
                band("800MHz", 50, 1.0),
                band("1800MHz", 100, 2.0),
                band("2100MHz", 75, 1.5),
                band("2600MHz", 75, 1.5),
            ],
            20,
            600_000,
        )
        .expect("default config is valid")
    }

    /// Same bands, different activation period.
    pub fn with_activation_ms(&self, activation_ms: u64) -> Result<Self> {
        let cell = Self {
            activation_ms,
            ..self.clone()
        };
        cell.check_periods()?;
        Ok(cell)
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// PRBs per TTI with every band on.
    pub fn total_prbs_per_tti(&self) -> u64 {
        self.bands.iter().map(|b| b.prbs_per_tti as u64).sum()
    }

    /// PRBs per TTI with only the lowest `n` bands on.
    pub fn capacity_of_lowest(&self, n: usize) -> u64 {
        self.bands[..n.min(self.bands.len())]
            .iter()
            .map(|b| b.prbs_per_tti as u64)
            .sum()
    }

    /// Reallocation windows per activation period.
    pub fn windows_per_period(&self) -> u64 {
        self.activation_ms / self.realloc_ms
    }

    pub fn band_index(&self, label: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.label == label)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Allocation of one TTI, one entry per band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtiLoad {
    pub tti_index: u64,
    pub allocated: Vec<u32>,
}

/// Gap-free per-TTI allocations starting at TTI 0, stored as runs of
/// identical allocation vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    cell: CellConfig,
    loads: Runs<Vec<u32>>,
}

impl TraceSeries {
    pub fn new(cell: CellConfig, loads: Runs<Vec<u32>>) -> Result<Self> {
        let mut tti = 0u64;
        for (alloc, n) in loads.runs() {
            check_allocation(&cell, tti, alloc)?;
            tti += n;
        }
        Ok(Self { cell, loads })
    }

    pub fn from_rows(cell: CellConfig, rows: Vec<Vec<u32>>) -> Result<Self> {
        Self::new(cell, rows.into())
    }

    pub fn empty(cell: CellConfig) -> Self {
        Self {
            cell,
            loads: Runs::new(),
        }
    }

    pub fn cell(&self) -> &CellConfig {
        &self.cell
    }

    pub fn loads(&self) -> &Runs<Vec<u32>> {
        &self.loads
    }

    /// Number of TTIs.
    pub fn len(&self) -> u64 {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = TtiLoad> + '_ {
        self.loads.iter().enumerate().map(|(i, a)| TtiLoad {
            tti_index: i as u64,
            allocated: a.clone(),
        })
    }

    /// TTIs `[start, end)`, re-indexed from zero.
    pub fn slice(&self, start: u64, end: u64) -> Self {
        Self {
            cell: self.cell.clone(),
            loads: self.loads.slice(start, end),
        }
    }

    /// Writes the canonical CSV form.
    pub fn write_csv<W: Write>(&self, w: W, format: TraceFormat) -> Result<()> {
        write_trace(w, self, format)
    }
}

fn check_allocation(cell: &CellConfig, tti: u64, alloc: &[u32]) -> Result<()> {
    if alloc.len() != cell.num_bands() {
        return Err(Error::Dimension {
            expected: cell.num_bands(),
            actual: alloc.len(),
        });
    }
    for (band, &a) in cell.bands.iter().zip(alloc) {
        if a > band.prbs_per_tti {
            return Err(Error::Validation(format!(
                "allocated exceeds band capacity at tti {tti}, band {}: {a} > {}",
                band.label, band.prbs_per_tti
            )));
        }
    }
    Ok(())
}

/// CSV layouts for traces.
///
/// `PerTti` is `tti,band,prbs` with one row per TTI and band. `Runs` adds a
/// fourth `span` column: the row's allocation holds for `span` consecutive
/// TTIs starting at `tti`. Multi-day synthetic traces are only practical in
/// the run form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    PerTti,
    Runs,
}

pub const TRACE_HEADER: &str = "tti,band,prbs";
pub const TRACE_RUNS_HEADER: &str = "tti,band,prbs,span";

pub fn parse_trace(path: impl AsRef<Path>, cell: &CellConfig) -> Result<TraceSeries> {
    let file = File::open(path)?;
    read_trace(BufReader::new(file), cell)
}

/// Parses either CSV layout. Missing TTIs become all-zero allocations.
pub fn read_trace<R: BufRead>(reader: R, cell: &CellConfig) -> Result<TraceSeries> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let columns = match header.trim_end() {
        TRACE_HEADER => 3,
        TRACE_RUNS_HEADER => 4,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header {other:?}, expected {TRACE_HEADER:?}"),
            })
        }
    };

    let label_index: HashMap<&str, usize> = cell
        .bands
        .iter()
        .enumerate()
        .map(|(i, b)| (b.label.as_str(), i))
        .collect();
    // per band: (start, span, prbs)
    let mut intervals: Vec<Vec<(u64, u64, u32)>> = vec![Vec::new(); cell.num_bands()];

    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        let int = |s: &str, what: &str| {
            s.trim().parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("{what} is not a non-negative integer: {s:?}"),
            })
        };
        let tti = int(fields[0], "tti")?;
        let prbs = int(fields[2], "prbs")?;
        let span = if columns == 4 { int(fields[3], "span")? } else { 1 };
        let band = *label_index
            .get(fields[1].trim())
            .ok_or_else(|| Error::ConfigMismatch(format!("line {line_no}: unknown band label {:?}", fields[1])))?;
        let cap = cell.bands[band].prbs_per_tti;
        if prbs > cap as u64 {
            return Err(Error::Validation(format!(
                "allocated exceeds band capacity at tti {tti}, band {}: {prbs} > {cap}",
                cell.bands[band].label
            )));
        }
        if span == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "span must be positive".into(),
            });
        }
        intervals[band].push((tti, span, prbs as u32));
    }

    let mut len = 0;
    for (band, iv) in intervals.iter_mut().enumerate() {
        iv.sort_unstable_by_key(|&(start, _, _)| start);
        for pair in iv.windows(2) {
            let (s0, n0, _) = pair[0];
            if pair[1].0 < s0 + n0 {
                return Err(Error::Validation(format!(
                    "duplicate entry for tti {}, band {}",
                    pair[1].0, cell.bands[band].label
                )));
            }
        }
        if let Some(&(s, n, _)) = iv.last() {
            len = len.max(s + n);
        }
    }

    let mut bounds: Vec<u64> = intervals
        .iter()
        .flatten()
        .flat_map(|&(s, n, _)| [s, s + n])
        .chain([0, len])
        .collect();
    bounds.sort_unstable();
    bounds.dedup();

    let mut cursor = vec![0usize; cell.num_bands()];
    let mut loads = Runs::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let alloc: Vec<u32> = intervals
            .iter()
            .zip(cursor.iter_mut())
            .map(|(iv, c)| {
                while *c < iv.len() && iv[*c].0 + iv[*c].1 <= lo {
                    *c += 1;
                }
                match iv.get(*c) {
                    Some(&(s, _, p)) if s <= lo => p,
                    _ => 0,
                }
            })
            .collect();
        loads.push(alloc, hi - lo);
    }
    Ok(TraceSeries {
        cell: cell.clone(),
        loads,
    })
}

pub fn write_trace<W: Write>(mut w: W, trace: &TraceSeries, format: TraceFormat) -> Result<()> {
    let labels: Vec<&str> = trace.cell.bands.iter().map(|b| b.label.as_str()).collect();
    match format {
        TraceFormat::PerTti => {
            writeln!(w, "{TRACE_HEADER}")?;
            for load in trace.iter() {
                for (label, prbs) in labels.iter().zip(&load.allocated) {
                    writeln!(w, "{},{label},{prbs}", load.tti_index)?;
                }
            }
        }
        TraceFormat::Runs => {
            writeln!(w, "{TRACE_RUNS_HEADER}")?;
            let mut tti = 0;
            for (alloc, n) in trace.loads.runs() {
                for (label, prbs) in labels.iter().zip(alloc) {
                    writeln!(w, "{tti},{label},{prbs},{n}")?;
                }
                tti += n;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Total PRBs over all bands per reallocation window.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSeries {
    pub realloc_ms: u64,
    pub values: Runs<u64>,
    /// The last window was shorter than `realloc_ms` and padded with idle TTIs.
    pub padded_tail: bool,
}

/// Cell-wide PRB demand of every TTI.
pub fn total_demand_per_tti(trace: &TraceSeries) -> Runs<u64> {
    trace.loads.map(|alloc| alloc.iter().map(|&a| a as u64).sum())
}

pub fn aggregate_theta(trace: &TraceSeries) -> ThetaSeries {
    let delta = trace.cell.realloc_ms;
    let (values, padded_tail) = total_demand_per_tti(trace).fold_chunks(delta, 0u64, |acc, v, n| acc + v * n);
    ThetaSeries {
        realloc_ms: delta,
        values,
        padded_tail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_band(delta: u64) -> CellConfig {
        let band = |label: &str, prbs| BandConfig {
            band_id: 0,
            label: label.into(),
            prbs_per_tti: prbs,
            power_weight: 1.0,
        };
        CellConfig::new(vec![band("800MHz", 6), band("1800MHz", 12)], delta, delta).unwrap()
    }

    fn parse(text: &str, cell: &CellConfig) -> Result<TraceSeries> {
        read_trace(text.as_bytes(), cell)
    }

    #[test]
    fn parses_single_tti() {
        let cell = two_band(2);
        let t = parse("tti,band,prbs\n0,800MHz,3\n0,1800MHz,0\n", &cell).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.iter().next().unwrap().allocated, vec![3, 0]);
    }

    #[test]
    fn fills_missing_ttis_with_zeros() {
        let cell = two_band(2);
        let t = parse("tti,band,prbs\n0,800MHz,3\n2,1800MHz,5\n", &cell).unwrap();
        let rows: Vec<_> = t.iter().map(|l| l.allocated).collect();
        assert_eq!(rows, vec![vec![3, 0], vec![0, 0], vec![0, 5]]);
    }

    #[test]
    fn rejects_over_capacity() {
        let cell = CellConfig::default_four_band();
        let err = parse("tti,band,prbs\n0,800MHz,999\n", &cell).unwrap_err();
        assert!(err.to_string().contains("allocated exceeds band capacity"), "{err}");
        assert!(err.to_string().contains("800MHz"));
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let cell = two_band(2);
        match parse("tti,band,prbs\n0,800MHz,1\n1,800MHz\n", &cell) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("tti,band,prbs\n0,800MHz,x\n", &cell) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("tti,prbs\n", &cell), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicate_and_unknown_bands() {
        let cell = two_band(2);
        assert!(matches!(
            parse("tti,band,prbs\n0,800MHz,1\n0,800MHz,2\n", &cell),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse("tti,band,prbs\n0,700MHz,1\n", &cell),
            Err(Error::ConfigMismatch(_))
        ));
        // overlapping spans are duplicates too
        assert!(matches!(
            parse("tti,band,prbs,span\n0,800MHz,1,5\n3,800MHz,2,1\n", &cell),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn runs_layout_expands() {
        let cell = two_band(2);
        let t = parse("tti,band,prbs,span\n0,800MHz,4,3\n1,1800MHz,7,1\n", &cell).unwrap();
        let rows: Vec<_> = t.iter().map(|l| l.allocated).collect();
        assert_eq!(rows, vec![vec![4, 0], vec![4, 7], vec![4, 0]]);
    }

    #[test]
    fn theta_of_reallocation_example() {
        // 2 bands of 6 and 12 PRBs, 2 ms windows
        let cell = two_band(2);
        let t = TraceSeries::from_rows(cell, vec![vec![6, 6], vec![6, 6], vec![6, 2], vec![4, 0]]).unwrap();
        assert_eq!(total_demand_per_tti(&t).to_vec(), vec![12, 12, 8, 4]);
        let theta = aggregate_theta(&t);
        assert_eq!(theta.values.to_vec(), vec![24, 12]);
        assert!(!theta.padded_tail);
    }

    #[test]
    fn theta_zero_and_identity_windows() {
        let cell = CellConfig::default_four_band();
        let zeros = TraceSeries::new(cell.clone(), {
            let mut r = Runs::new();
            r.push(vec![0; 4], 40);
            r
        })
        .unwrap();
        assert_eq!(aggregate_theta(&zeros).values.to_vec(), vec![0, 0]);

        let one = CellConfig::new(cell.bands.clone(), 1, 1).unwrap();
        let t = TraceSeries::from_rows(one, vec![vec![1, 2, 0, 0], vec![0, 0, 5, 5], vec![3, 0, 0, 0]]).unwrap();
        assert_eq!(aggregate_theta(&t).values.to_vec(), total_demand_per_tti(&t).to_vec());
    }

    #[test]
    fn partial_window_is_padded_and_flagged() {
        let cell = two_band(2);
        let t = TraceSeries::from_rows(cell, vec![vec![1, 0], vec![1, 0], vec![3, 0]]).unwrap();
        let theta = aggregate_theta(&t);
        assert_eq!(theta.values.to_vec(), vec![2, 3]);
        assert!(theta.padded_tail);
    }

    #[test]
    fn empty_trace() {
        let t = TraceSeries::empty(two_band(2));
        assert!(total_demand_per_tti(&t).is_empty());
        assert!(aggregate_theta(&t).values.is_empty());
    }

    #[test]
    fn cell_config_json() {
        let json = r#"{"bands":[{"label":"800MHz","prbs_per_tti":50,"power_weight":1.0},
            {"label":"1800MHz","prbs_per_tti":100,"power_weight":2.0}],
            "realloc_ms":20,"activation_ms":600000}"#;
        let cell: CellConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cell.bands[1].band_id, 2);
        assert_eq!(cell.total_prbs_per_tti(), 150);

        let bad = json.replace("600000", "600010");
        assert!(serde_json::from_str::<CellConfig>(&bad).is_err());
        let zero = json.replace("\"prbs_per_tti\":50", "\"prbs_per_tti\":0");
        assert!(serde_json::from_str::<CellConfig>(&zero).is_err());
    }

    #[test]
    fn default_cell_capacities() {
        let cell = CellConfig::default_four_band();
        let prbs: Vec<u32> = cell.bands.iter().map(|b| b.prbs_per_tti).collect();
        assert_eq!(prbs, vec![50, 100, 75, 75]);
        assert_eq!(cell.windows_per_period(), 30_000);
    }
}
