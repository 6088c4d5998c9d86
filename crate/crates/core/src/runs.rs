//! Run-length encoded sequences.
//!
//! A day of traffic is 86.4 million TTIs, so every long per-TTI series in the
//! crate is stored as runs of repeated values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Runs<T> {
    runs: Vec<(T, u64)>,
    len: u64,
}

impl<T> Default for Runs<T> {
    fn default() -> Self {
        Self {
            runs: Vec::new(),
            len: 0,
        }
    }
}

impl<T: Clone + PartialEq> Runs<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `count` copies of `value`, merging with the last run when equal.
    pub fn push(&mut self, value: T, count: u64) {
        if count == 0 {
            return;
        }
        self.len += count;
        if let Some((last, n)) = self.runs.last_mut() {
            if *last == value {
                *n += count;
                return;
            }
        }
        self.runs.push((value, count));
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn runs(&self) -> &[(T, u64)] {
        &self.runs
    }

    /// Expanded element iterator.
    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.runs.iter().flat_map(|(v, n)| std::iter::repeat_n(v, *n as usize))
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.iter().cloned().collect()
    }

    /// Elements in `[start, end)`, clamped to the sequence length.
    pub fn slice(&self, start: u64, end: u64) -> Runs<T> {
        let end = end.min(self.len);
        let mut out = Runs::new();
        if start >= end {
            return out;
        }
        let mut pos = 0;
        for (v, n) in &self.runs {
            let (lo, hi) = (pos, pos + n);
            pos = hi;
            if hi <= start {
                continue;
            }
            if lo >= end {
                break;
            }
            out.push(v.clone(), hi.min(end) - lo.max(start));
        }
        out
    }

    pub fn map<U: Clone + PartialEq>(&self, mut f: impl FnMut(&T) -> U) -> Runs<U> {
        let mut out = Runs::new();
        for (v, n) in &self.runs {
            out.push(f(v), *n);
        }
        out
    }

    /// Folds consecutive chunks of `width` elements.
    ///
    /// `step(acc, value, count)` absorbs `count` copies of `value`. A trailing
    /// chunk shorter than `width` is still folded; the returned flag reports
    /// whether that happened. Chunks lying entirely inside one run are folded
    /// once and repeated, so the cost is proportional to the number of runs.
    pub fn fold_chunks<A, F>(&self, width: u64, init: A, mut step: F) -> (Runs<A>, bool)
    where
        A: Clone + PartialEq,
        F: FnMut(A, &T, u64) -> A,
    {
        assert!(width > 0, "chunk width must be positive");
        let mut out = Runs::new();
        let mut acc = init.clone();
        let mut filled = 0u64;
        for (v, n) in &self.runs {
            let mut left = *n;
            if filled > 0 {
                let take = left.min(width - filled);
                acc = step(acc, v, take);
                filled += take;
                left -= take;
                if filled == width {
                    out.push(std::mem::replace(&mut acc, init.clone()), 1);
                    filled = 0;
                }
            }
            if left > 0 {
                let full = left / width;
                if full > 0 {
                    out.push(step(init.clone(), v, width), full);
                }
                let rem = left % width;
                if rem > 0 {
                    acc = step(init.clone(), v, rem);
                    filled = rem;
                }
            }
        }
        let partial = filled > 0;
        if partial {
            out.push(acc, 1);
        }
        (out, partial)
    }
}

impl Runs<u64> {
    pub fn sum(&self) -> u64 {
        self.runs.iter().map(|(v, n)| v * n).sum()
    }
}

impl<T: Clone + PartialEq> FromIterator<T> for Runs<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut out = Runs::new();
        for v in iter {
            out.push(v, 1);
        }
        out
    }
}

impl<T: Clone + PartialEq> From<Vec<T>> for Runs<T> {
    fn from(v: Vec<T>) -> Self {
        v.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_merges_equal_neighbours() {
        let mut r = Runs::new();
        r.push(3u64, 2);
        r.push(3, 1);
        r.push(5, 0);
        r.push(4, 1);
        assert_eq!(r.runs(), &[(3, 3), (4, 1)]);
        assert_eq!(r.len(), 4);
        assert_eq!(r.to_vec(), vec![3, 3, 3, 4]);
    }

    #[test]
    fn slice_cuts_inside_runs() {
        let r: Runs<u64> = vec![1, 1, 1, 2, 2, 3].into();
        assert_eq!(r.slice(2, 5).to_vec(), vec![1, 2, 2]);
        assert_eq!(r.slice(4, 100).to_vec(), vec![2, 3]);
        assert!(r.slice(6, 9).is_empty());
    }

    proptest! {
        #[test]
        fn fold_chunks_matches_expanded_sums(
            values in prop::collection::vec(0u64..4, 0..60),
            width in 1u64..7,
        ) {
            let runs: Runs<u64> = values.clone().into();
            let (sums, partial) = runs.fold_chunks(width, 0u64, |a, v, n| a + v * n);
            let expected: Vec<u64> = values.chunks(width as usize).map(|c| c.iter().sum()).collect();
            prop_assert_eq!(sums.to_vec(), expected);
            prop_assert_eq!(partial, !(values.len() as u64).is_multiple_of(width));
        }
    }
}
