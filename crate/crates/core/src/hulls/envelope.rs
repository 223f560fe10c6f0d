//! Convex envelope `g(p, β)` of `(σ(p) - β)²` on a padded rectangle, computed
//! as the discrete biconjugate by iterated 1-D conjugation.
//!
//! The 2-D conjugate separates:
//! `F*(s, t) = max_p [s·p + max_β (t·β - F(p, β))]`, and the biconjugate
//! `F**(p, β) = max_s [s·p + max_t (t·β - F*(s, t))]`. Each inner max is a 1-D
//! conjugate, so the four passes run in `O(N·M)` per dual line.
//!
//! Dual grids are symmetric lattices `{k·Δ}`. An affine minorant whose slope
//! in one variable exceeds the discrete Lipschitz constant of `F` along that
//! variable is dominated on the box by a clipped one, so each dual axis only
//! needs to span the matching Lipschitz constant.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::legendre::conjugate;
use crate::error::{Error, Result};
use crate::flux::{gamma_interval, FluxModel, Window};
use crate::interval::IntervalSet;

/// Upper bound on nodes per dual axis.
const MAX_DUAL_NODES: usize = 4097;

/// Tabulated `F(p, β) = (σ(p) - β)²` on the padded grid.
#[derive(Debug, Clone)]
pub struct SurfaceTable {
    pub p_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    pub h_p: f64,
    pub h_beta: f64,
    /// `values[[i, j]] = F(p_axis[i], beta_axis[j])`
    pub values: Array2<f64>,
    /// `(offset, len)` of the unpadded window inside each axis.
    pub p_inner: (usize, usize),
    pub beta_inner: (usize, usize),
    pub pad_p: f64,
    pub pad_beta: f64,
    pub fingerprint: String,
}

impl SurfaceTable {
    /// Wraps arbitrary values on uniform axes with no padding.
    pub fn from_values(p_axis: Vec<f64>, beta_axis: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (p_axis.len(), beta_axis.len()) {
            return Err(Error::Shape(format!(
                "values {:?} vs axes ({}, {})",
                values.dim(),
                p_axis.len(),
                beta_axis.len()
            )));
        }
        if p_axis.len() < 2 || beta_axis.len() < 2 {
            return Err(Error::Shape("need at least 2 nodes per axis".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("surface contains non-finite values".into()));
        }
        let h_p = (p_axis[p_axis.len() - 1] - p_axis[0]) / (p_axis.len() - 1) as f64;
        let h_beta = (beta_axis[beta_axis.len() - 1] - beta_axis[0]) / (beta_axis.len() - 1) as f64;
        let (np, nb) = (p_axis.len(), beta_axis.len());
        Ok(Self {
            p_axis,
            beta_axis,
            h_p,
            h_beta,
            values,
            p_inner: (0, np),
            beta_inner: (0, nb),
            pad_p: 0.0,
            pad_beta: 0.0,
            fingerprint: String::new(),
        })
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    /// Largest second difference along β divided by `h_β²`.
    pub fn beta_curvature(&self) -> f64 {
        let (np, nb) = self.values.dim();
        let h2 = self.h_beta * self.h_beta;
        let mut kappa = 0.0f64;
        for i in 0..np {
            for j in 1..nb - 1 {
                let d2 = self.values[[i, j + 1]] - 2.0 * self.values[[i, j]] + self.values[[i, j - 1]];
                kappa = kappa.max(d2.abs() / h2);
            }
        }
        kappa
    }

    /// Discrete Lipschitz constants along p and along β.
    fn lipschitz(&self) -> (f64, f64) {
        let (np, nb) = self.values.dim();
        let mut lp = 0.0f64;
        let mut lb = 0.0f64;
        for i in 0..np {
            for j in 0..nb {
                let v = self.values[[i, j]];
                if i + 1 < np {
                    let dp = self.p_axis[i + 1] - self.p_axis[i];
                    lp = lp.max((self.values[[i + 1, j]] - v).abs() / dp);
                }
                if j + 1 < nb {
                    let db = self.beta_axis[j + 1] - self.beta_axis[j];
                    lb = lb.max((self.values[[i, j + 1]] - v).abs() / db);
                }
            }
        }
        (lp, lb)
    }
}

/// `F(p_i, β_j) = (σ(p_i) - β_j)²` on the padded product grid.
pub fn residual_surface(flux: &FluxModel, window_p: &Window, window_beta: &Window) -> Result<SurfaceTable> {
    window_p.validate()?;
    window_beta.validate()?;
    let p_axis: Vec<f64> = (0..window_p.padded_len()).map(|i| window_p.padded_node(i)).collect();
    let beta_axis: Vec<f64> = (0..window_beta.padded_len()).map(|j| window_beta.padded_node(j)).collect();
    let sigma = p_axis.iter().map(|&p| flux.eval(p)).collect::<Result<Vec<f64>>>()?;
    let values = Array2::from_shape_fn((p_axis.len(), beta_axis.len()), |(i, j)| {
        let d = sigma[i] - beta_axis[j];
        d * d
    });
    Ok(SurfaceTable {
        p_axis,
        beta_axis,
        h_p: window_p.spacing(),
        h_beta: window_beta.spacing(),
        values,
        p_inner: (window_p.pad_nodes(), window_p.n),
        beta_inner: (window_beta.pad_nodes(), window_beta.n),
        pad_p: window_p.pad,
        pad_beta: window_beta.pad,
        fingerprint: fingerprint(flux, window_p, window_beta),
    })
}

/// Stable hex digest of a flux and its windows; keys the binary cache.
pub fn fingerprint(flux: &FluxModel, window_p: &Window, window_beta: &Window) -> String {
    let key = serde_json::json!({ "flux": flux, "p": window_p, "beta": window_beta });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
}

/// Symmetric dual lattices `s_k = (k - s_half)·step`, `t_k = (k - t_half)·step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSpec {
    pub step: f64,
    pub s_half: usize,
    pub t_half: usize,
}

impl DualSpec {
    /// Lattice step `2·min(h_p, h_β)`, coarsened only if an axis would exceed
    /// the node cap.
    pub fn for_surface(surface: &SurfaceTable) -> Self {
        let (lp, lb) = surface.lipschitz();
        let mut step = 2.0 * surface.h_p.min(surface.h_beta);
        let widest = lp.max(lb);
        let half_cap = (MAX_DUAL_NODES - 1) / 2;
        if (widest / step).ceil() as usize + 1 > half_cap {
            step = widest / (half_cap - 1) as f64;
        }
        Self {
            step,
            s_half: (lp / step).ceil() as usize + 1,
            t_half: (lb / step).ceil() as usize + 1,
        }
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        lattice(self.step, self.s_half)
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        lattice(self.step, self.t_half)
    }
}

fn lattice(step: f64, half: usize) -> Vec<f64> {
    (0..=2 * half).map(|k| (k as f64 - half as f64) * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMeta {
    pub h_p: f64,
    pub h_beta: f64,
    pub pad_p: f64,
    pub pad_beta: f64,
    pub fingerprint: String,
    /// Largest β-curvature of the hulled surface (sets the zero-set tolerance).
    pub beta_curvature: f64,
    pub max_f: f64,
    pub dual: DualSpec,
}

/// Values of the convex envelope on the unpadded window.
#[derive(Debug, Clone)]
pub struct EnvelopeTable {
    pub p_axis: Vec<f64>,
    pub beta_axis: Vec<f64>,
    pub values: Array2<f64>,
    /// Cells whose supporting plane touches the outer edge of the padded grid.
    pub boundary: Array2<bool>,
    pub meta: EnvelopeMeta,
}

impl EnvelopeTable {
    pub fn p_range(&self) -> (f64, f64) {
        (self.p_axis[0], self.p_axis[self.p_axis.len() - 1])
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_axis[0], self.beta_axis[self.beta_axis.len() - 1])
    }

    /// Default zero-set threshold `10·h_β²·κ`.
    pub fn default_zero_tol(&self) -> f64 {
        10.0 * self.meta.h_beta * self.meta.h_beta * self.meta.beta_curvature.max(f64::EPSILON)
    }

    /// The table as an unpadded surface, for re-hulling.
    pub fn as_surface(&self) -> SurfaceTable {
        let mut s = SurfaceTable::from_values(self.p_axis.clone(), self.beta_axis.clone(), self.values.clone())
            .expect("envelope tables are well formed");
        s.fingerprint = self.meta.fingerprint.clone();
        s
    }

    /// Fraction of nodes flagged as boundary-affected.
    pub fn boundary_fraction(&self) -> f64 {
        self.boundary.iter().filter(|&&b| b).count() as f64 / self.boundary.len() as f64
    }
}

/// Discrete biconjugate of `surface` restricted to its unpadded window, with
/// dual lattices sized from the surface.
pub fn convex_envelope(surface: &SurfaceTable) -> EnvelopeTable {
    convex_envelope_with(surface, DualSpec::for_surface(surface))
}

/// Discrete biconjugate through the given dual lattices.
pub fn convex_envelope_with(surface: &SurfaceTable, dual: DualSpec) -> EnvelopeTable {
    let (np, nb) = surface.values.dim();
    let s_nodes = dual.s_nodes();
    let t_nodes = dual.t_nodes();
    let (ns, nt) = (s_nodes.len(), t_nodes.len());

    // pass 1: G(p_i, t) = max_β (tβ - F(p_i, β)), per p row
    let rows: Vec<_> = (0..np)
        .into_par_iter()
        .map(|i| {
            let f = surface.values.row(i).to_vec();
            conjugate(&surface.beta_axis, &f, &t_nodes)
        })
        .collect();

    // pass 2: F*(s, t) = max_p (s p + G(p, t)), per t column
    let columns: Vec<(Vec<f64>, Vec<bool>)> = (0..nt)
        .into_par_iter()
        .map(|k| {
            let neg_g: Vec<f64> = rows.iter().map(|r| -r.values[k]).collect();
            let c = conjugate(&surface.p_axis, &neg_g, &s_nodes);
            let edge = c
                .argmax
                .iter()
                .map(|&i| {
                    let j = rows[i].argmax[k];
                    i == 0 || i + 1 == np || j == 0 || j + 1 == nb
                })
                .collect();
            (c.values, edge)
        })
        .collect();
    drop(rows);
    let mut fstar = Array2::<f64>::zeros((ns, nt));
    let mut edge = Array2::<bool>::from_elem((ns, nt), false);
    for (k, (vals, flags)) in columns.into_iter().enumerate() {
        for l in 0..ns {
            fstar[[l, k]] = vals[l];
            edge[[l, k]] = flags[l];
        }
    }

    let (p_off, p_len) = surface.p_inner;
    let (b_off, b_len) = surface.beta_inner;
    let p_axis = surface.p_axis[p_off..p_off + p_len].to_vec();
    let beta_axis = surface.beta_axis[b_off..b_off + b_len].to_vec();

    // pass 3: K(s, β) = max_t (tβ - F*(s, t)), per s row, at inner β nodes
    let k_rows: Vec<_> = (0..ns)
        .into_par_iter()
        .map(|l| {
            let f = fstar.row(l).to_vec();
            conjugate(&t_nodes, &f, &beta_axis)
        })
        .collect();

    // pass 4: F**(p, β) = max_s (s p + K(s, β)), per inner β column
    let cols: Vec<(Vec<f64>, Vec<bool>)> = (0..b_len)
        .into_par_iter()
        .map(|j| {
            let neg_k: Vec<f64> = k_rows.iter().map(|r| -r.values[j]).collect();
            let c = conjugate(&s_nodes, &neg_k, &p_axis);
            let flags = c.argmax.iter().map(|&l| edge[[l, k_rows[l].argmax[j]]]).collect();
            (c.values, flags)
        })
        .collect();

    let mut values = Array2::<f64>::zeros((p_len, b_len));
    let mut boundary = Array2::<bool>::from_elem((p_len, b_len), false);
    for (j, (vals, flags)) in cols.into_iter().enumerate() {
        for i in 0..p_len {
            let f = surface.values[[p_off + i, b_off + j]];
            // rounding can push the max a few ulps past either bound
            values[[i, j]] = vals[i].clamp(0.0, f.max(0.0));
            boundary[[i, j]] = flags[i];
        }
    }

    EnvelopeTable {
        p_axis,
        beta_axis,
        values,
        boundary,
        meta: EnvelopeMeta {
            h_p: surface.h_p,
            h_beta: surface.h_beta,
            pad_p: surface.pad_p,
            pad_beta: surface.pad_beta,
            fingerprint: surface.fingerprint.clone(),
            beta_curvature: surface.beta_curvature(),
            max_f: surface.max_value(),
            dual,
        },
    }
}

/// Reapplies the envelope operator with the table's own dual lattices.
pub fn reconvexify(env: &EnvelopeTable) -> EnvelopeTable {
    let mut again = convex_envelope_with(&env.as_surface(), env.meta.dual);
    again.meta.beta_curvature = env.meta.beta_curvature;
    again.meta.max_f = env.meta.max_f;
    again.meta.h_beta = env.meta.h_beta;
    again
}

fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    let k = axis.partition_point(|&a| a <= x).clamp(1, n - 1);
    let w = (x - axis[k - 1]) / (axis[k] - axis[k - 1]);
    (k - 1, w.clamp(0.0, 1.0))
}

/// Bilinear interpolation of `g` inside the unpadded window.
pub fn g_eval(env: &EnvelopeTable, p: f64, beta: f64) -> Result<f64> {
    let (p_lo, p_hi) = env.p_range();
    let (b_lo, b_hi) = env.beta_range();
    let tol_p = 1e-12 * (1.0 + p_lo.abs().max(p_hi.abs()));
    let tol_b = 1e-12 * (1.0 + b_lo.abs().max(b_hi.abs()));
    if !(p >= p_lo - tol_p && p <= p_hi + tol_p) {
        return Err(Error::OutOfRange { what: "envelope p", value: p, lo: p_lo, hi: p_hi });
    }
    if !(beta >= b_lo - tol_b && beta <= b_hi + tol_b) {
        return Err(Error::OutOfRange { what: "envelope beta", value: beta, lo: b_lo, hi: b_hi });
    }
    let (i, wp) = locate(&env.p_axis, p);
    let (j, wb) = locate(&env.beta_axis, beta);
    let v = &env.values;
    Ok((1.0 - wp) * ((1.0 - wb) * v[[i, j]] + wb * v[[i, j + 1]])
        + wp * ((1.0 - wb) * v[[i + 1, j]] + wb * v[[i + 1, j + 1]]))
}

/// The column `β ↦ g(p, β)` interpolated linearly in p.
fn column(env: &EnvelopeTable, p: f64) -> Result<Vec<f64>> {
    let (p_lo, p_hi) = env.p_range();
    let tol = 1e-12 * (1.0 + p_lo.abs().max(p_hi.abs()));
    if !(p >= p_lo - tol && p <= p_hi + tol) {
        return Err(Error::OutOfRange { what: "envelope p", value: p, lo: p_lo, hi: p_hi });
    }
    let (i, w) = locate(&env.p_axis, p);
    Ok((0..env.beta_axis.len())
        .map(|j| (1.0 - w) * env.values[[i, j]] + w * env.values[[i + 1, j]])
        .collect())
}

/// `{β : g(p, β) <= tol}` as a single interval, endpoints placed where the
/// linear interpolant crosses `tol`.
pub fn z_interval(env: &EnvelopeTable, p: f64, tol: f64) -> Result<IntervalSet> {
    let col = column(env, p)?;
    let beta = &env.beta_axis;
    let Some(first) = col.iter().position(|&g| g <= tol) else {
        return Ok(IntervalSet::empty());
    };
    let last = col.iter().rposition(|&g| g <= tol).unwrap_or(first);
    let cross = |a: usize, b: usize| {
        let (ga, gb) = (col[a], col[b]);
        let w = if gb != ga { (tol - ga) / (gb - ga) } else { 0.0 };
        beta[a] + w.clamp(0.0, 1.0) * (beta[b] - beta[a])
    };
    let lo = if first == 0 { beta[0] } else { cross(first, first - 1) };
    let hi = if last + 1 == beta.len() { beta[last] } else { cross(last, last + 1) };
    Ok(IntervalSet::single(lo, hi, first == 0, last + 1 == beta.len()))
}

/// Σ(p) = Γ(p) ∩ Z(p) with the default zero-set threshold.
pub fn sigma_interval(
    flux: &FluxModel,
    env: &EnvelopeTable,
    lambda_set: &IntervalSet,
    p: f64,
) -> Result<IntervalSet> {
    sigma_interval_with_tol(flux, env, lambda_set, p, env.default_zero_tol())
}

pub fn sigma_interval_with_tol(
    flux: &FluxModel,
    env: &EnvelopeTable,
    lambda_set: &IntervalSet,
    p: f64,
    tol: f64,
) -> Result<IntervalSet> {
    let gamma = gamma_interval(flux, lambda_set, p, env.beta_range());
    let z = z_interval(env, p, tol)?;
    Ok(gamma.intersect(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::monotone_set;

    /// Brute-force biconjugate over the full primal and dual grids.
    fn brute_biconjugate(s: &SurfaceTable, dual: &DualSpec) -> Array2<f64> {
        let (sn, tn) = (dual.s_nodes(), dual.t_nodes());
        let (np, nb) = s.values.dim();
        let mut fstar = Array2::<f64>::zeros((sn.len(), tn.len()));
        for (l, &a) in sn.iter().enumerate() {
            for (k, &b) in tn.iter().enumerate() {
                let mut best = f64::NEG_INFINITY;
                for i in 0..np {
                    for j in 0..nb {
                        best = best.max(a * s.p_axis[i] + b * s.beta_axis[j] - s.values[[i, j]]);
                    }
                }
                fstar[[l, k]] = best;
            }
        }
        let (po, pl) = s.p_inner;
        let (bo, bl) = s.beta_inner;
        Array2::from_shape_fn((pl, bl), |(i, j)| {
            let (p, beta) = (s.p_axis[po + i], s.beta_axis[bo + j]);
            let mut best = f64::NEG_INFINITY;
            for (l, &a) in sn.iter().enumerate() {
                for (k, &b) in tn.iter().enumerate() {
                    best = best.max(a * p + b * beta - fstar[[l, k]]);
                }
            }
            best
        })
    }

    #[test]
    fn iterated_conjugation_matches_brute_force_on_small_grid() {
        let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
        let wp = Window::new(-2.0, 2.0, 16, 0.5).unwrap();
        let wb = Window::new(-2.5, 2.5, 16, 0.6).unwrap();
        let s = residual_surface(&f, &wp, &wb).unwrap();
        let dual = DualSpec { step: 0.8, s_half: 12, t_half: 10 };
        let env = convex_envelope_with(&s, dual);
        let oracle = brute_biconjugate(&s, &dual);
        for ((i, j), &g) in env.values.indexed_iter() {
            let o = oracle[[i, j]].clamp(0.0, s.values[[s.p_inner.0 + i, s.beta_inner.0 + j]]);
            assert!((g - o).abs() < 1e-10, "({i},{j}) {g} vs {o}");
        }
    }

    #[test]
    fn residual_surface_examples() {
        let w = Window::new(-4.0, 4.0, 17, 1.0).unwrap();
        let lin = residual_surface(&FluxModel::linear(1.0), &w, &w).unwrap();
        let at = |s: &SurfaceTable, p: f64, b: f64| {
            let i = s.p_axis.iter().position(|&x| (x - p).abs() < 1e-12).unwrap();
            let j = s.beta_axis.iter().position(|&x| (x - b).abs() < 1e-12).unwrap();
            s.values[[i, j]]
        };
        assert_eq!(at(&lin, 2.0, 2.0), 0.0);
        let bump = residual_surface(&FluxModel::rational_bump(4.0, 1.0).unwrap(), &w, &w).unwrap();
        assert!((at(&bump, 1.0, 0.0) - 4.0).abs() < 1e-14);
        let h = residual_surface(&FluxModel::hollig(), &w, &w).unwrap();
        assert!(at(&h, 3.0, 1.0).abs() < 1e-14);
        assert_eq!(lin.p_inner, (2, 17));
    }

    #[test]
    fn sampled_flux_outside_table_is_rejected() {
        let f = FluxModel::sampled(vec![(-1.0, -1.0), (1.0, 1.0)]).unwrap();
        let w = Window::new(-1.0, 1.0, 16, 0.5).unwrap();
        assert!(residual_surface(&f, &w, &w).is_err());
    }

    #[test]
    fn linear_flux_is_its_own_envelope() {
        let w = Window::new(-3.0, 3.0, 65, 1.5).unwrap();
        let s = residual_surface(&FluxModel::linear(1.0), &w, &w).unwrap();
        let env = convex_envelope(&s);
        let max_f = s.max_value();
        for ((i, j), &g) in env.values.indexed_iter() {
            let (p, b) = (env.p_axis[i], env.beta_axis[j]);
            assert!((g - (p - b).powi(2)).abs() <= 1e-9 * max_f, "({p},{b}) {g}");
        }
        assert!(env.boundary_fraction() < 0.5);
    }

    #[test]
    fn g_eval_at_nodes_and_out_of_range() {
        let w = Window::new(-2.0, 2.0, 33, 0.5).unwrap();
        let s = residual_surface(&FluxModel::hollig(), &w, &w).unwrap();
        let env = convex_envelope(&s);
        let v = g_eval(&env, env.p_axis[7], env.beta_axis[20]).unwrap();
        assert_eq!(v, env.values[[7, 20]]);
        assert!(matches!(g_eval(&env, 2.5, 0.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(g_eval(&env, 0.0, -2.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rational_bump_zero_set_is_the_strip() {
        let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
        let wp = Window::new(-2.0, 2.0, 129, 48.0).unwrap();
        let wb = Window::new(-2.5, 2.5, 129, 1.25).unwrap();
        let env = convex_envelope(&residual_surface(&f, &wp, &wb).unwrap());
        let h = wb.spacing();
        assert!(g_eval(&env, 0.0, 1.0).unwrap() < env.default_zero_tol());
        // tighter threshold so the quadratic onset stays inside 2 h_β
        let z = z_interval(&env, 1.7, h * h).unwrap();
        let (lo, hi) = z.bounds().unwrap();
        assert!((lo + 2.0).abs() <= 2.0 * h && (hi - 2.0).abs() <= 2.0 * h, "{z:?}");

        let lambda = monotone_set(&f, &Window::new(-6.0, 6.0, 257, 3.0).unwrap());
        // g grows like (β - 2)² past the strip, so the default threshold widens Z by √tol
        let slack = env.default_zero_tol().sqrt() + 2.0 * h;
        let s0 = sigma_interval(&f, &env, &lambda, 0.0).unwrap();
        let (lo, hi) = s0.bounds().unwrap();
        assert!((lo + 2.0).abs() < slack && (hi - 2.0).abs() < slack, "{s0:?}");
        let s2 = sigma_interval(&f, &env, &lambda, 2.0).unwrap();
        let (lo, hi) = s2.bounds().unwrap();
        assert!(lo.abs() < 1e-12 && (hi - 2.0).abs() < slack, "{s2:?}");
    }

    #[test]
    fn linear_zero_set_is_a_point() {
        let w = Window::new(-2.0, 2.0, 65, 0.5).unwrap();
        let env = convex_envelope(&residual_surface(&FluxModel::linear(1.0), &w, &w).unwrap());
        let tol = env.default_zero_tol();
        let z = z_interval(&env, 0.0, tol).unwrap();
        let (lo, hi) = z.bounds().unwrap();
        assert!(lo.abs() <= 2.0 * tol.sqrt() && hi.abs() <= 2.0 * tol.sqrt(), "{z:?}");
        assert!(!z.truncated_lo && !z.truncated_hi);
    }

    #[test]
    fn z_interval_empty_when_tol_below_column_minimum() {
        let w = Window::new(-2.0, 2.0, 33, 0.5).unwrap();
        let env = convex_envelope(&residual_surface(&FluxModel::linear(1.0), &w, &w).unwrap());
        // the node (0.0625·k) never sits exactly on β = p + 0.03
        let p = 0.03;
        assert!(z_interval(&env, p, 1e-9).unwrap().is_empty());
    }
}
