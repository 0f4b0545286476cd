// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic multi-scale seeded intervals.
//!
//! Layer `k` holds `2^k - 1` intervals of length `T 2^{1-k}` shifted by half
//! their length: `(floor((i-1) T 2^-k), ceil((i-1) T 2^-k + T 2^{1-k})]`,
//! truncated to `(0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default multiplier of `ln T` for the number of layers.
pub const DEFAULT_DEPTH_MULTIPLIER: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededInterval {
    pub layer: u32,
    /// Exclusive left end `s` of `(s, e]`.
    pub start: usize,
    /// Inclusive right end `e` of `(s, e]`.
    pub end: usize,
}

impl SeededInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Whether `(start, end]` lies inside `(s, e]`.
    pub fn within(&self, s: usize, e: usize) -> bool {
        s <= self.start && self.end <= e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeededIntervalSet {
    pub len: usize,
    pub depth: u32,
    /// Ordered by layer, then by position.
    pub intervals: Vec<SeededInterval>,
}

/// Deepest layer whose intervals still have length at least 2.
fn max_depth(len: usize) -> u32 {
    // T 2^{1-k} >= 2  <=>  2^k <= T
    usize::BITS - 1 - len.leading_zeros()
}

impl SeededIntervalSet {
    /// Layers `1..=ceil(multiplier * ln T)`, capped so the finest intervals
    /// keep length >= 2.
    pub fn generate(len: usize, multiplier: f64) -> Result<Self> {
        if len < 4 {
            return Err(Error::input(format!(
                "seeded intervals need T >= 4, got {len}"
            )));
        }
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(Error::config(format!(
                "depth multiplier must be positive, got {multiplier}"
            )));
        }
        let wanted = (multiplier * (len as f64).ln()).ceil().max(1.0);
        let depth = (wanted as u64).min(max_depth(len) as u64) as u32;
        Self::with_depth(len, depth)
    }

    /// Exactly `depth` layers.
    pub fn with_depth(len: usize, depth: u32) -> Result<Self> {
        if len < 2 {
            return Err(Error::input(format!(
                "seeded intervals need T >= 2, got {len}"
            )));
        }
        if depth == 0 || depth > max_depth(len) {
            return Err(Error::config(format!(
                "depth {depth} outside 1..={} for T = {len}",
                max_depth(len)
            )));
        }
        let t = len as u128;
        let mut intervals = Vec::with_capacity((1usize << (depth + 1)) - depth as usize - 2);
        for k in 1..=depth {
            let denom = 1u128 << k;
            for i in 1..(1u128 << k) {
                let start = ((i - 1) * t) / denom;
                let end = ((i + 1) * t).div_ceil(denom).min(t);
                intervals.push(SeededInterval {
                    layer: k,
                    start: start as usize,
                    end: end as usize,
                });
            }
        }
        Ok(Self {
            len,
            depth,
            intervals,
        })
    }

    pub fn layer(&self, k: u32) -> impl Iterator<Item = &SeededInterval> {
        self.intervals.iter().filter(move |iv| iv.layer == k)
    }
}

/// Builds the seeded interval collection for a sample of size `len`.
pub fn generate(len: usize, multiplier: f64) -> Result<SeededIntervalSet> {
    SeededIntervalSet::generate(len, multiplier)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(set: &SeededIntervalSet, k: u32) -> Vec<(usize, usize)> {
        set.layer(k).map(|iv| (iv.start, iv.end)).collect()
    }

    #[test]
    fn small_enumeration() {
        let set = SeededIntervalSet::with_depth(8, 2).unwrap();
        assert_eq!(pairs(&set, 1), vec![(0, 8)]);
        assert_eq!(pairs(&set, 2), vec![(0, 4), (2, 6), (4, 8)]);
    }

    #[test]
    fn third_layer_of_sixteen() {
        let set = SeededIntervalSet::with_depth(16, 3).unwrap();
        let l3 = pairs(&set, 3);
        assert_eq!(l3.len(), 7);
        for (i, &(s, e)) in l3.iter().enumerate() {
            assert_eq!(s, 2 * i);
            assert_eq!(e - s, 4);
        }
    }

    #[test]
    fn first_layer_is_whole_sample() {
        for t in [4, 7, 100, 1000] {
            let set = SeededIntervalSet::generate(t, 1.0).unwrap();
            assert_eq!(pairs(&set, 1), vec![(0, t)]);
        }
    }

    #[test]
    fn depth_is_capped() {
        let set = SeededIntervalSet::generate(150, 1.0).unwrap();
        assert_eq!(set.depth, 6);
        let set = SeededIntervalSet::generate(150, 10.0).unwrap();
        assert_eq!(set.depth, 7);
        assert!(set.layer(7).all(|iv| iv.len() >= 2));
        assert!(SeededIntervalSet::with_depth(16, 5).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            SeededIntervalSet::generate(333, 1.3).unwrap(),
            SeededIntervalSet::generate(333, 1.3).unwrap()
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SeededIntervalSet::generate(3, 1.0).is_err());
        assert!(SeededIntervalSet::generate(10, 0.0).is_err());
    }
}
