//! Discrete Legendre–Fenchel conjugate in linear time.
//!
//! `f*(s) = max_j (s·x_j - f_j)` is attained on the lower convex hull of the
//! lifted points `(x_j, f_j)`. With the slopes sorted, a single pointer walk
//! over the hull evaluates every dual node, so a conjugate costs
//! `O(n + m)` for `n` primal and `m` dual nodes.

/// Conjugate values together with a representative maximiser per dual node.
#[derive(Debug, Clone)]
pub struct Conjugate {
    pub values: Vec<f64>,
    /// Primal index attaining the max. When a whole hull edge is tangent to
    /// the slope (within rounding), the middle of the tied run is reported.
    pub argmax: Vec<usize>,
}

/// Indices of the lower convex hull of `(xs[i], f[i])`, `xs` increasing.
/// Collinear points are dropped.
pub fn lower_hull(xs: &[f64], f: &[f64]) -> Vec<usize> {
    debug_assert_eq!(xs.len(), f.len());
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // keep b only if it lies strictly below the chord a -> i
            let cross = (xs[b] - xs[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// `f*(s_k) = max_j (s_k·x_j - f_j)` for ascending `slopes`.
pub fn conjugate(xs: &[f64], f: &[f64], slopes: &[f64]) -> Conjugate {
    assert_eq!(xs.len(), f.len(), "primal abscissae and values differ in length");
    assert!(!xs.is_empty(), "empty primal sample");
    debug_assert!(slopes.windows(2).all(|w| w[0] <= w[1]), "slopes must be ascending");

    let hull = lower_hull(xs, f);
    let edge: Vec<f64> = hull
        .windows(2)
        .map(|w| (f[w[1]] - f[w[0]]) / (xs[w[1]] - xs[w[0]]))
        .collect();

    let mut values = Vec::with_capacity(slopes.len());
    let mut argmax = Vec::with_capacity(slopes.len());
    let mut k = 0; // exact maximiser on the hull
    let mut tie_lo = 0; // first hull vertex of the tied run
    let mut tie_hi = 0; // last hull vertex of the tied run
    for &s in slopes {
        while k < edge.len() && edge[k] < s {
            k += 1;
        }
        let tol = 1e-10 * (1.0 + s.abs());
        while tie_lo < edge.len() && edge[tie_lo] < s - tol {
            tie_lo += 1;
        }
        tie_hi = tie_hi.max(tie_lo);
        while tie_hi < edge.len() && edge[tie_hi] <= s + tol {
            tie_hi += 1;
        }
        let j = hull[k];
        values.push(s * xs[j] - f[j]);
        argmax.push((hull[tie_lo] + hull[tie_hi]) / 2);
    }
    Conjugate { values, argmax }
}

/// Conjugate evaluated on the primal grid itself.
pub fn legendre_conjugate_1d(xs: &[f64], f: &[f64]) -> Vec<f64> {
    conjugate(xs, f, xs).values
}

/// Discrete biconjugate (lower convex envelope at the nodes) through the
/// dual grid `slopes`.
pub fn biconjugate(xs: &[f64], f: &[f64], slopes: &[f64]) -> Vec<f64> {
    let star = conjugate(xs, f, slopes).values;
    conjugate(slopes, &star, xs).values
}
