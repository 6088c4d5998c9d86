//! Day ranges and the working-day filter.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Half-open range of day indices. Day 0 is a Monday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: u32,
    pub end: u32,
}

impl DayRange {
    pub fn new(start: u32, end: u32) -> anyhow::Result<Self> {
        anyhow::ensure!(start < end, "empty day range {start}..{end}");
        Ok(Self { start, end })
    }

    /// Selected days, skipping Saturdays and Sundays unless `weekends`.
    pub fn days(&self, weekends: bool) -> Vec<u32> {
        (self.start..self.end).filter(|&d| weekends || !is_weekend(d)).collect()
    }

    pub fn overlaps(&self, other: &DayRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for DayRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for DayRange {
    type Err = anyhow::Error;

    /// Accepts `a..b` (half-open) or a single day `a`.
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| anyhow::anyhow!("bad day {x:?} in range {s:?}"))
        };
        match s.split_once("..") {
            Some((a, b)) => Self::new(parse(a)?, parse(b)?),
            None => {
                let d = parse(s)?;
                Self::new(d, d + 1)
            }
        }
    }
}

pub fn is_weekend(day: u32) -> bool {
    day % 7 >= 5
}

/// Groups sorted days into runs of consecutive days.
pub fn contiguous_segments(days: &[u32]) -> Vec<Range<u32>> {
    let mut out: Vec<Range<u32>> = Vec::new();
    for &d in days {
        match out.last_mut() {
            Some(r) if r.end == d => r.end = d + 1,
            _ => out.push(d..d + 1),
        }
    }
    out
}

/// The single run of consecutive days covered by the selection.
pub fn single_segment(days: &[u32]) -> anyhow::Result<Range<u32>> {
    match contiguous_segments(days).as_slice() {
        [one] => Ok(one.clone()),
        [] => anyhow::bail!("no days selected"),
        many => anyhow::bail!(
            "selected days form {} separate stretches; pick consecutive days or pass --include-weekends",
            many.len()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_filter() {
        let r: DayRange = "0..14".parse().unwrap();
        assert_eq!(r.days(false), vec![0, 1, 2, 3, 4, 7, 8, 9, 10, 11]);
        assert_eq!(r.days(true).len(), 14);
        assert_eq!("3".parse::<DayRange>().unwrap(), DayRange::new(3, 4).unwrap());
        assert!("5..5".parse::<DayRange>().is_err());
        assert!("a..2".parse::<DayRange>().is_err());
    }

    #[test]
    fn segments() {
        assert_eq!(contiguous_segments(&[0, 1, 2, 4, 5, 9]), vec![0..3, 4..6, 9..10]);
        assert_eq!(single_segment(&[7, 8]).unwrap(), 7..9);
        assert!(single_segment(&[3, 4, 7]).is_err());
    }
}
