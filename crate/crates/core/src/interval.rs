//! Finite unions of closed intervals on a truncated real line.

use serde::{Deserialize, Serialize};

/// A sorted list of disjoint closed intervals.
///
/// `truncated_lo` / `truncated_hi` record that the set reaches the edge of the
/// computational window, so the true set may extend further (possibly to
/// infinity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<(f64, f64)>,
    pub truncated_lo: bool,
    pub truncated_hi: bool,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
            truncated_lo: false,
            truncated_hi: false,
        }
    }

    pub fn single(lo: f64, hi: f64, truncated_lo: bool, truncated_hi: bool) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Self {
            intervals: vec![(lo, hi)],
            truncated_lo,
            truncated_hi,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    /// Smallest and largest point of the set.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        let lo = self.intervals.first()?.0;
        let hi = self.intervals.last()?.1;
        Some((lo, hi))
    }

    /// Total length of the set.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Width of the convex hull of the set (0 for empty sets).
    pub fn width(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| hi - lo)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| x >= lo - tol && x <= hi + tol)
    }

    /// Signed distance from `x` to the complement: positive inside, negative outside.
    pub fn margin(&self, x: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(lo, hi)| (x - lo).min(hi - x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Set intersection. A side is truncated only if both operands are
    /// truncated there.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a_lo, a_hi) = self.intervals[i];
            let (b_lo, b_hi) = other.intervals[j];
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if lo <= hi {
                out.push((lo, hi));
            }
            if a_hi < b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        if out.is_empty() {
            return IntervalSet::empty();
        }
        IntervalSet {
            intervals: out,
            truncated_lo: self.truncated_lo && other.truncated_lo,
            truncated_hi: self.truncated_hi && other.truncated_hi,
        }
    }

    /// Checks the ordering invariants.
    pub fn is_well_formed(&self) -> bool {
        self.intervals.iter().all(|(lo, hi)| lo <= hi)
            && self.intervals.windows(2).all(|w| w[0].1 < w[1].0)
    }
}
