//! Scalar diffusion fluxes, the monotonicity set and the half-space set.
//!
//! A point `p` belongs to the monotonicity set when `(σ(q) - σ(p))(q - p) >= 0`
//! for every `q`. In one dimension this is equivalent to
//! `sup_{q<p} σ(q) <= σ(p) <= inf_{q>p} σ(q)`, which a prefix-max / suffix-min
//! scan evaluates in linear time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::IntervalSet;

/// Analytic or tabulated flux law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxKind {
    /// σ(p) = slope·p
    Linear {
        #[serde(alias = "a")]
        slope: f64,
    },
    /// Linear interpolation between knots, linear extrapolation with the end slopes.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// σ(p) = A·p / (1 + (p/s)²)
    RationalBump {
        #[serde(alias = "A")]
        amplitude: f64,
        #[serde(alias = "s")]
        scale: f64,
    },
    /// Linear interpolation of a table; undefined outside its range.
    Sampled { table: Vec<(f64, f64)> },
}

/// A flux σ together with its growth constant `c1` in `|σ(p)| <= c1(|p| + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxModel {
    kind: FluxKind,
    growth_c1: f64,
    has_derivative: bool,
    derivative_step: f64,
}

impl FluxModel {
    pub fn new(kind: FluxKind) -> Result<Self> {
        let (has_derivative, derivative_step) = match &kind {
            FluxKind::Linear { slope } => {
                check_finite(*slope, "slope")?;
                (true, 0.0)
            }
            FluxKind::RationalBump { amplitude, scale } => {
                check_finite(*amplitude, "amplitude")?;
                check_finite(*scale, "scale")?;
                if *scale <= 0.0 {
                    return Err(Error::InvalidFlux(format!("scale must be positive, got {scale}")));
                }
                (true, 0.0)
            }
            FluxKind::PiecewiseLinear { knots } => {
                check_table(knots, 1)?;
                (true, 0.0)
            }
            FluxKind::Sampled { table } => {
                check_table(table, 2)?;
                let span = table[table.len() - 1].0 - table[0].0;
                (false, 1e-4 * span)
            }
        };
        let mut model = Self {
            kind,
            growth_c1: 0.0,
            has_derivative,
            derivative_step,
        };
        let (lo, hi) = model.growth_probe_range();
        model.growth_c1 = model.fit_growth(lo, hi)?;
        Ok(model)
    }

    pub fn linear(slope: f64) -> Self {
        Self::new(FluxKind::Linear { slope }).expect("finite slope")
    }

    pub fn rational_bump(amplitude: f64, scale: f64) -> Result<Self> {
        Self::new(FluxKind::RationalBump { amplitude, scale })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(FluxKind::PiecewiseLinear { knots })
    }

    pub fn sampled(table: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(FluxKind::Sampled { table })
    }

    /// The Höllig-type flux used throughout the tests:
    /// σ(p) = p for p <= 2, 4 - p on [2, 3], (p - 1)/2 for p >= 3.
    pub fn hollig() -> Self {
        Self::piecewise_linear(vec![(0.0, 0.0), (2.0, 2.0), (3.0, 1.0), (5.0, 2.0)])
            .expect("valid knots")
    }

    /// Loads a two-column `p,sigma` CSV (header required).
    pub fn sampled_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut table: Vec<(f64, f64)> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 2 {
                return Err(Error::Table {
                    line,
                    msg: format!("expected 2 columns, found {}", record.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Table {
                    line,
                    msg: format!("cannot parse {s:?}: {e}"),
                })
            };
            let p = parse(&record[0])?;
            let s = parse(&record[1])?;
            if !p.is_finite() || !s.is_finite() {
                return Err(Error::Table { line, msg: "non-finite value".into() });
            }
            if let Some(&(prev, _)) = table.last() {
                if p <= prev {
                    return Err(Error::Table {
                        line,
                        msg: format!("p column not strictly increasing ({p} after {prev})"),
                    });
                }
            }
            table.push((p, s));
        }
        if table.len() < 2 {
            return Err(Error::Table { line: 0, msg: "need at least 2 rows".into() });
        }
        Self::sampled(table)
    }

    /// Overrides the growth constant after checking it on `window`.
    pub fn with_growth_c1(mut self, c1: f64, window: &Window) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(Error::InvalidFlux(format!("growth constant must be positive, got {c1}")));
        }
        let (lo, hi) = window.padded_bounds();
        let (lo, hi) = self.clamp_to_domain(lo, hi);
        let needed = self.fit_growth(lo, hi)?;
        if needed > c1 * (1.0 + 1e-12) {
            return Err(Error::InvalidFlux(format!(
                "growth bound |σ(p)| <= {c1}(|p|+1) violated on the window (needs {needed:.6})"
            )));
        }
        self.growth_c1 = c1;
        Ok(self)
    }

    /// Sets the finite-difference step used for tabulated derivatives.
    pub fn with_derivative_step(mut self, step: f64) -> Self {
        if step > 0.0 {
            self.derivative_step = step;
        }
        self
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn growth_c1(&self) -> f64 {
        self.growth_c1
    }

    pub fn has_derivative(&self) -> bool {
        self.has_derivative
    }

    pub fn derivative_step(&self) -> f64 {
        self.derivative_step
    }

    /// Closed interval where σ is defined (finite only for tables).
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            FluxKind::Sampled { table } => (table[0].0, table[table.len() - 1].0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// σ(p).
    pub fn eval(&self, p: f64) -> Result<f64> {
        match &self.kind {
            FluxKind::Sampled { table } => {
                let (lo, hi) = (table[0].0, table[table.len() - 1].0);
                if !(p >= lo && p <= hi) {
                    return Err(Error::OutOfRange {
                        what: "sampled flux argument",
                        value: p,
                        lo,
                        hi,
                    });
                }
                Ok(interpolate(table, p))
            }
            _ => Ok(self.eval_unchecked(p)),
        }
    }

    /// σ(p) without the table range check; tables are clamped at their ends.
    pub fn eval_unchecked(&self, p: f64) -> f64 {
        match &self.kind {
            FluxKind::Linear { slope } => slope * p,
            FluxKind::RationalBump { amplitude, scale } => {
                let r = p / scale;
                amplitude * p / (1.0 + r * r)
            }
            FluxKind::PiecewiseLinear { knots } => interpolate(knots, p),
            FluxKind::Sampled { table } => {
                let (lo, hi) = (table[0].0, table[table.len() - 1].0);
                interpolate(table, p.clamp(lo, hi))
            }
        }
    }

    /// σ'(p): analytic where available, averaged one-sided slopes at knots,
    /// centred differences for tables.
    pub fn derivative(&self, p: f64) -> f64 {
        match &self.kind {
            FluxKind::Linear { slope } => *slope,
            FluxKind::RationalBump { amplitude, scale } => {
                let r2 = (p / scale) * (p / scale);
                amplitude * (1.0 - r2) / ((1.0 + r2) * (1.0 + r2))
            }
            FluxKind::PiecewiseLinear { knots } => piecewise_slope(knots, p),
            FluxKind::Sampled { table } => {
                let h = self.derivative_step;
                let (lo, hi) = (table[0].0, table[table.len() - 1].0);
                let a = (p - h).max(lo);
                let b = (p + h).min(hi);
                if b <= a {
                    return 0.0;
                }
                (interpolate(table, b) - interpolate(table, a)) / (b - a)
            }
        }
    }

    /// Largest |σ'| on `[lo, hi]`, estimated on a fine sample plus knots.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = self.clamp_to_domain(lo, hi);
        match &self.kind {
            FluxKind::Linear { slope } => slope.abs(),
            FluxKind::RationalBump { amplitude, .. } => amplitude.abs(),
            FluxKind::PiecewiseLinear { knots } | FluxKind::Sampled { table: knots } => {
                let mut best = 0.0f64;
                for w in knots.windows(2) {
                    if w[1].0 >= lo && w[0].0 <= hi {
                        best = best.max(((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs());
                    }
                }
                if let FluxKind::PiecewiseLinear { .. } = self.kind {
                    best = best
                        .max(piecewise_slope(knots, knots[0].0 - 1.0).abs())
                        .max(piecewise_slope(knots, knots[knots.len() - 1].0 + 1.0).abs());
                }
                best
            }
        }
    }

    /// `sup σ(q)` over `q < lo`, including limits at -∞.
    /// Returns -∞ when nothing is known beyond `lo` (tables).
    pub fn sup_below(&self, lo: f64) -> f64 {
        match &self.kind {
            FluxKind::Linear { slope } => {
                if *slope >= 0.0 {
                    slope * lo
                } else {
                    f64::INFINITY
                }
            }
            FluxKind::RationalBump { scale, .. } => {
                let mut best = 0.0f64.max(self.eval_unchecked(lo));
                for c in [-scale, *scale] {
                    if c < lo {
                        best = best.max(self.eval_unchecked(c));
                    }
                }
                best
            }
            FluxKind::PiecewiseLinear { knots } => {
                let left_slope = piecewise_slope(knots, knots[0].0 - 1.0);
                if left_slope < 0.0 {
                    return f64::INFINITY;
                }
                let mut best = self.eval_unchecked(lo.min(knots[0].0));
                for &(_, s) in knots.iter().filter(|(q, _)| *q < lo) {
                    best = best.max(s);
                }
                best.max(self.eval_unchecked(lo))
            }
            FluxKind::Sampled { .. } => f64::NEG_INFINITY,
        }
    }

    /// `inf σ(q)` over `q > hi`, including limits at +∞.
    /// Returns +∞ when nothing is known beyond `hi` (tables).
    pub fn inf_above(&self, hi: f64) -> f64 {
        match &self.kind {
            FluxKind::Linear { slope } => {
                if *slope >= 0.0 {
                    slope * hi
                } else {
                    f64::NEG_INFINITY
                }
            }
            FluxKind::RationalBump { scale, .. } => {
                let mut best = 0.0f64.min(self.eval_unchecked(hi));
                for c in [-scale, *scale] {
                    if c > hi {
                        best = best.min(self.eval_unchecked(c));
                    }
                }
                best
            }
            FluxKind::PiecewiseLinear { knots } => {
                let last = knots[knots.len() - 1].0;
                let right_slope = piecewise_slope(knots, last + 1.0);
                if right_slope < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut best = self.eval_unchecked(hi.max(last));
                for &(_, s) in knots.iter().filter(|(q, _)| *q > hi) {
                    best = best.min(s);
                }
                best.min(self.eval_unchecked(hi))
            }
            FluxKind::Sampled { .. } => f64::INFINITY,
        }
    }

    /// Intersects `[lo, hi]` with the flux domain.
    pub fn clamp_to_domain(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (dlo, dhi) = self.domain();
        (lo.max(dlo), hi.min(dhi))
    }

    fn growth_probe_range(&self) -> (f64, f64) {
        match &self.kind {
            FluxKind::Linear { .. } => (-1.0, 1.0),
            FluxKind::RationalBump { scale, .. } => (-100.0 * scale, 100.0 * scale),
            FluxKind::PiecewiseLinear { knots } => {
                let span = knots[knots.len() - 1].0 - knots[0].0;
                (knots[0].0 - span - 10.0, knots[knots.len() - 1].0 + span + 10.0)
            }
            FluxKind::Sampled { table } => (table[0].0, table[table.len() - 1].0),
        }
    }

    fn fit_growth(&self, lo: f64, hi: f64) -> Result<f64> {
        const SAMPLES: usize = 4097;
        if let FluxKind::Linear { slope } = self.kind {
            return Ok(slope.abs().max(f64::MIN_POSITIVE));
        }
        let ratio = |p: f64| self.eval_unchecked(p).abs() / (p.abs() + 1.0);
        let step = (hi - lo) / (SAMPLES - 1) as f64;
        let mut candidates: Vec<f64> = (0..SAMPLES).map(|i| lo + step * i as f64).collect();
        if let FluxKind::PiecewiseLinear { knots } | FluxKind::Sampled { table: knots } = &self.kind {
            candidates.extend(knots.iter().map(|k| k.0).filter(|&x| x >= lo && x <= hi));
        }
        let (best, mut c1) = candidates
            .into_iter()
            .map(|p| (p, ratio(p)))
            .fold((lo, 0.0f64), |acc, (p, r)| if r > acc.1 { (p, r) } else { acc });
        // golden-section polish around the best sample
        let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if ratio(x1) > ratio(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        c1 = c1.max(ratio(0.5 * (a + b)));
        if !c1.is_finite() {
            return Err(Error::InvalidFlux("flux is not finite on its probe range".into()));
        }
        Ok(c1.max(f64::MIN_POSITIVE) * (1.0 + 1e-9))
    }
}

fn check_finite(x: f64, name: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidFlux(format!("{name} must be finite, got {x}")))
    }
}

fn check_table(table: &[(f64, f64)], min_len: usize) -> Result<()> {
    if table.len() < min_len.max(1) {
        return Err(Error::InvalidFlux(format!(
            "need at least {min_len} points, got {}",
            table.len()
        )));
    }
    for (i, &(p, s)) in table.iter().enumerate() {
        if !p.is_finite() || !s.is_finite() {
            return Err(Error::InvalidFlux(format!("point {i} is not finite")));
        }
        if i > 0 && p <= table[i - 1].0 {
            return Err(Error::InvalidFlux(format!(
                "abscissae must be strictly increasing (point {i}: {p} after {})",
                table[i - 1].0
            )));
        }
    }
    Ok(())
}

/// Linear interpolation with linear extrapolation by the end segments.
fn interpolate(knots: &[(f64, f64)], p: f64) -> f64 {
    if knots.len() == 1 {
        return knots[0].1;
    }
    let k = knots.partition_point(|&(q, _)| q <= p).clamp(1, knots.len() - 1);
    let (p0, s0) = knots[k - 1];
    let (p1, s1) = knots[k];
    s0 + (s1 - s0) * (p - p0) / (p1 - p0)
}

fn segment_slope(knots: &[(f64, f64)], k: usize) -> f64 {
    (knots[k + 1].1 - knots[k].1) / (knots[k + 1].0 - knots[k].0)
}

fn piecewise_slope(knots: &[(f64, f64)], p: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return 0.0;
    }
    let scale = 1.0 + p.abs();
    if let Some(k) = knots.iter().position(|&(q, _)| (q - p).abs() <= 1e-12 * scale) {
        let left = segment_slope(knots, k.saturating_sub(1).min(n - 2));
        let right = segment_slope(knots, k.min(n - 2));
        return 0.5 * (left + right);
    }
    let k = knots.partition_point(|&(q, _)| q <= p).clamp(1, n - 1);
    segment_slope(knots, k - 1)
}

/// Uniform grid on `[p_min, p_max]` with `n` nodes, plus `pad` of extension on
/// each side for scans and hulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub p_min: f64,
    pub p_max: f64,
    pub n: usize,
    pub pad: f64,
}

impl Window {
    pub fn new(p_min: f64, p_max: f64, n: usize, pad: f64) -> Result<Self> {
        let w = Self { p_min, p_max, n, pad };
        w.validate()?;
        Ok(w)
    }

    /// Window with the default 25 % pad on each side.
    pub fn with_default_pad(p_min: f64, p_max: f64, n: usize) -> Result<Self> {
        Self::new(p_min, p_max, n, 0.25 * (p_max - p_min))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min < self.p_max) {
            return Err(Error::InvalidWindow(format!(
                "need finite p_min < p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if self.n < 16 {
            return Err(Error::InvalidWindow(format!("need at least 16 nodes, got {}", self.n)));
        }
        if !(self.pad >= 0.0 && self.pad.is_finite()) {
            return Err(Error::InvalidWindow(format!("pad must be finite and >= 0, got {}", self.pad)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.p_max
        } else {
            self.p_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Number of extra nodes on each side.
    pub fn pad_nodes(&self) -> usize {
        (self.pad / self.spacing() - 1e-9).ceil().max(0.0) as usize
    }

    pub fn padded_len(&self) -> usize {
        self.n + 2 * self.pad_nodes()
    }

    /// Node `i` of the padded grid; index `pad_nodes()` is `p_min`.
    pub fn padded_node(&self, i: usize) -> f64 {
        let m = self.pad_nodes();
        if i >= m && i - m < self.n {
            self.node(i - m)
        } else {
            self.p_min + (i as f64 - m as f64) * self.spacing()
        }
    }

    pub fn padded_bounds(&self) -> (f64, f64) {
        let m = self.pad_nodes() as f64 * self.spacing();
        (self.p_min - m, self.p_max + m)
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.p_min && p <= self.p_max
    }
}

/// Grid approximation of the monotonicity set restricted to the window.
///
/// Runs of member nodes narrower than 1.5 grid spacings are reported as
/// single points (zero-width intervals).
pub fn monotone_set(flux: &FluxModel, window: &Window) -> IntervalSet {
    let h = window.spacing();
    let m = window.pad_nodes();
    let (dom_lo, dom_hi) = flux.domain();

    // padded scan, restricted to where σ is defined
    let scan: Vec<(usize, f64)> = (0..window.padded_len())
        .map(|i| (i, window.padded_node(i)))
        .filter(|&(_, p)| p >= dom_lo && p <= dom_hi)
        .collect();
    if scan.is_empty() {
        return IntervalSet::empty();
    }
    let sigma: Vec<f64> = scan.iter().map(|&(_, p)| flux.eval_unchecked(p)).collect();
    let n = scan.len();
    let scale = 1.0 + sigma.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let tol = 1e-12 * scale;

    let mut prefix_max = vec![flux.sup_below(scan[0].1); n];
    for i in 1..n {
        prefix_max[i] = prefix_max[i - 1].max(sigma[i - 1]);
    }
    let mut suffix_min = vec![flux.inf_above(scan[n - 1].1); n];
    for i in (0..n - 1).rev() {
        suffix_min[i] = suffix_min[i + 1].min(sigma[i + 1]);
    }

    let member: Vec<Option<usize>> = (0..n)
        .filter(|&i| prefix_max[i] <= sigma[i] + tol && sigma[i] <= suffix_min[i] + tol)
        .map(|i| scan[i].0)
        .filter(|&j| j >= m && j < m + window.n)
        .map(|j| Some(j - m))
        .collect();

    let mut intervals = Vec::new();
    let mut iter = member.into_iter().flatten().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap_or(end);
        }
        intervals.push((start, end));
    }

    let truncated_lo = intervals.first().is_some_and(|r| r.0 == 0);
    let truncated_hi = intervals.last().is_some_and(|r| r.1 + 1 == window.n);
    let intervals = intervals
        .into_iter()
        .map(|(a, b)| {
            let (lo, hi) = (window.node(a), window.node(b));
            if hi - lo < 1.5 * h {
                let mid = if b == a { lo } else { 0.5 * (lo + hi) };
                (mid, mid)
            } else {
                (lo, hi)
            }
        })
        .collect();
    IntervalSet {
        intervals,
        truncated_lo,
        truncated_hi,
    }
}

/// Sample count used to bound σ over a piece of the monotonicity set.
const GAMMA_SAMPLES: usize = 65;

/// Half-space set Γ(p) = {β : (β - σ(q))(p - q) >= 0 for all q in Λ},
/// intersected with `beta_window`.
///
/// Returns an empty set if the lower bound exceeds the upper bound (only
/// possible through grid noise).
pub fn gamma_interval(
    flux: &FluxModel,
    lambda_set: &IntervalSet,
    p: f64,
    beta_window: (f64, f64),
) -> IntervalSet {
    let (b_lo, b_hi) = beta_window;
    if lambda_set.is_empty() {
        return IntervalSet::single(b_lo, b_hi, true, true);
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for &(lo, hi) in &lambda_set.intervals {
        if lo < p {
            lower = lower.max(extreme_on(flux, lo, hi.min(p), f64::max));
        }
        if hi > p {
            upper = upper.min(extreme_on(flux, lo.max(p), hi, f64::min));
        }
    }
    let lo = lower.max(b_lo);
    let hi = upper.min(b_hi);
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if lo > hi + slack {
        return IntervalSet::empty();
    }
    IntervalSet::single(lo, hi.max(lo), lower <= b_lo, upper >= b_hi)
}

fn extreme_on(flux: &FluxModel, lo: f64, hi: f64, pick: fn(f64, f64) -> f64) -> f64 {
    if hi <= lo {
        return flux.eval_unchecked(lo);
    }
    (0..GAMMA_SAMPLES)
        .map(|i| flux.eval_unchecked(lo + (hi - lo) * i as f64 / (GAMMA_SAMPLES - 1) as f64))
        .reduce(pick)
        .unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Pairwise definition of the monotonicity set on a uniform grid.
    fn brute_force_lambda(flux: &FluxModel, lo: f64, hi: f64, n: usize) -> Vec<(f64, bool)> {
        let pts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let sig: Vec<f64> = pts.iter().map(|&p| flux.eval_unchecked(p)).collect();
        (0..n)
            .map(|i| {
                let ok = (0..n).all(|j| (sig[j] - sig[i]) * (pts[j] - pts[i]) >= -1e-12);
                (pts[i], ok)
            })
            .collect()
    }

    #[test]
    fn eval_examples() {
        let bump = FluxModel::rational_bump(4.0, 1.0).unwrap();
        assert_abs_diff_eq!(bump.eval(1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(FluxModel::linear(1.0).eval(3.0).unwrap(), 3.0);
        let h = FluxModel::hollig();
        assert_abs_diff_eq!(h.eval(5.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.eval(-1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.eval(2.5).unwrap(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.eval(9.0).unwrap(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let bump = FluxModel::rational_bump(4.0, 1.0).unwrap();
        assert_abs_diff_eq!(bump.derivative(0.0), 4.0);
        assert_abs_diff_eq!(FluxModel::linear(-0.3).derivative(7.0), -0.3);
        let h = FluxModel::hollig();
        assert_abs_diff_eq!(h.derivative(2.5), -1.0, epsilon = 1e-15);
        // knot: average of one-sided slopes
        assert_abs_diff_eq!(h.derivative(2.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.derivative(3.0), -0.25, epsilon = 1e-15);
    }

    #[test]
    fn sampled_range_error_names_bounds() {
        let f = FluxModel::sampled(vec![(-1.0, -1.0), (0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(f.eval(1.0).unwrap(), 0.5);
        let err = f.eval(2.5).unwrap_err().to_string();
        assert!(err.contains("[-1, 2]"), "{err}");
    }

    #[test]
    fn sampled_derivative_is_segment_slope_away_from_knots() {
        let f = FluxModel::sampled(vec![(-1.0, -1.0), (0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(f.derivative(1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.derivative(-0.5), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn construction_rejects_bad_tables() {
        assert!(FluxModel::piecewise_linear(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(FluxModel::sampled(vec![(0.0, 0.0)]).is_err());
        assert!(FluxModel::rational_bump(4.0, 0.0).is_err());
        assert!(FluxModel::new(FluxKind::Linear { slope: f64::NAN }).is_err());
    }

    #[test]
    fn growth_constant_holds_and_rejects_too_small() {
        let w = Window::new(-6.0, 6.0, 257, 3.0).unwrap();
        for f in [
            FluxModel::linear(2.0),
            FluxModel::rational_bump(4.0, 1.0).unwrap(),
            FluxModel::hollig(),
        ] {
            let c1 = f.growth_c1();
            for p in w.nodes() {
                assert!(f.eval_unchecked(p).abs() <= c1 * (p.abs() + 1.0) + 1e-12);
            }
        }
        let bump = FluxModel::rational_bump(4.0, 1.0).unwrap();
        assert!(bump.clone().with_growth_c1(0.5, &w).is_err());
        assert!(bump.with_growth_c1(5.0, &w).is_ok());
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(1.0, 1.0, 32, 0.0).is_err());
        assert!(Window::new(0.0, 1.0, 15, 0.0).is_err());
        assert!(Window::new(0.0, 1.0, 16, -1.0).is_err());
        let w = Window::new(-6.0, 6.0, 257, 3.0).unwrap();
        assert_eq!(w.pad_nodes(), 64);
        assert_eq!(w.padded_node(64), -6.0);
        assert_abs_diff_eq!(w.padded_node(0), -9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.padded_node(w.padded_len() - 1), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_of_rational_bump_is_origin() {
        let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
        let w = Window::new(-6.0, 6.0, 257, 3.0).unwrap();
        let l = monotone_set(&f, &w);
        assert_eq!(l.intervals, vec![(0.0, 0.0)]);
        assert!(!l.truncated_lo && !l.truncated_hi);
    }

    #[test]
    fn lambda_of_linear_is_whole_window() {
        let w = Window::new(-3.0, 4.0, 64, 1.0).unwrap();
        let l = monotone_set(&FluxModel::linear(1.0), &w);
        assert_eq!(l.intervals, vec![(-3.0, 4.0)]);
        assert!(l.truncated_lo && l.truncated_hi);
        let l0 = monotone_set(&FluxModel::linear(0.0), &w);
        assert_eq!(l0.intervals, vec![(-3.0, 4.0)]);
        let neg = monotone_set(&FluxModel::linear(-1.0), &w);
        assert!(neg.is_empty());
    }

    #[test]
    fn lambda_of_hollig_matches_pairwise_oracle() {
        let f = FluxModel::hollig();
        let w = Window::new(-2.0, 8.0, 2000, 2.5).unwrap();
        let l = monotone_set(&f, &w);
        assert_eq!(l.len(), 2);
        let h = w.spacing();
        let (a, b) = (l.intervals[0], l.intervals[1]);
        assert_abs_diff_eq!(a.0, -2.0);
        assert!((a.1 - 1.0).abs() <= 2.0 * h, "{a:?}");
        assert!((b.0 - 5.0).abs() <= 2.0 * h, "{b:?}");
        assert_abs_diff_eq!(b.1, 8.0);
        assert!(l.truncated_lo && l.truncated_hi);

        // pairwise oracle on the padded range, which contains the whole structure of H
        let (plo, phi) = w.padded_bounds();
        let oracle = brute_force_lambda(&f, plo, phi, 2000);
        for (p, inside) in oracle {
            if !w.contains(p) || (p - 1.0).abs() < 2.0 * h || (p - 5.0).abs() < 2.0 * h {
                continue;
            }
            assert_eq!(l.contains(p, 0.0), inside, "p = {p}");
        }
    }

    #[test]
    fn gamma_examples() {
        let h = FluxModel::hollig();
        let w = Window::new(-2.0, 8.0, 1001, 2.5).unwrap();
        let l = monotone_set(&h, &w);
        let g = gamma_interval(&h, &l, 3.0, (-4.0, 6.0));
        let (lo, hi) = g.bounds().unwrap();
        assert!((lo - 1.0).abs() <= 2.0 * w.spacing(), "{g:?}");
        assert!((hi - 2.0).abs() <= 2.0 * w.spacing(), "{g:?}");
        assert!(!g.truncated_lo && !g.truncated_hi);

        let bump = FluxModel::rational_bump(4.0, 1.0).unwrap();
        let wb = Window::new(-6.0, 6.0, 257, 3.0).unwrap();
        let lb = monotone_set(&bump, &wb);
        let g = gamma_interval(&bump, &lb, 2.0, (-3.0, 3.0));
        assert_eq!(g.intervals, vec![(0.0, 3.0)]);
        assert!(g.truncated_hi && !g.truncated_lo);

        let lin = FluxModel::linear(1.0);
        let wl = Window::new(-2.0, 2.0, 257, 1.0).unwrap();
        let ll = monotone_set(&lin, &wl);
        let g = gamma_interval(&lin, &ll, 0.5, (-3.0, 3.0));
        assert!(g.width() <= wl.spacing());
        assert!(g.contains(0.5, 1e-12));
    }

    #[test]
    fn gamma_of_empty_lambda_is_whole_window() {
        let g = gamma_interval(&FluxModel::linear(-1.0), &IntervalSet::empty(), 0.3, (-2.0, 2.0));
        assert_eq!(g.intervals, vec![(-2.0, 2.0)]);
        assert!(g.truncated_lo && g.truncated_hi);
    }

    #[test]
    fn csv_loader_reports_line_of_bad_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "p,sigma\n0,0\n1,1\n0.5,2\n").unwrap();
        let err = FluxModel::sampled_from_csv(&path).unwrap_err();
        match err {
            Error::Table { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
        std::fs::write(&path, "p,sigma\n0,0\n1,1\n2,0.5\n").unwrap();
        let f = FluxModel::sampled_from_csv(&path).unwrap();
        assert_abs_diff_eq!(f.eval(1.5).unwrap(), 0.75);
    }
}
