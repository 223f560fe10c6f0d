//! The squared-residual functional of the first-order system
//! `u = div v`, `v_t = σ(Du)`:
//!
//! `I(u, v) = ‖v_t - σ(Du)‖² + ‖u - div v‖²`,
//!
//! its relaxation with the convex envelope `g`, the exact gradient of the
//! discrete `I`, and a projected Armijo descent.

use std::path::Path;

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Axis, CellField, FieldPair, ScalarField, SpaceTimeGrid};
use crate::flux::FluxModel;
use crate::hulls::{g_eval, EnvelopeTable};
use crate::residual::approx_residual;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `‖v_t - σ(Du)‖²`
    pub flux_term: f64,
    /// `‖u - div v‖²`
    pub div_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(flux_term: f64, div_term: f64) -> Self {
        Self { flux_term, div_term, total: flux_term + div_term }
    }
}

/// Cell quantities entering the integrand.
struct Cells {
    du: CellField,
    vt: CellField,
    u: CellField,
    divv: CellField,
}

fn cells(w: &FieldPair) -> Cells {
    Cells {
        du: w.u.cell_diff(Axis::X),
        vt: w.v.cell_diff(Axis::T),
        u: w.u.cell_values(),
        divv: w.v.cell_diff(Axis::X),
    }
}

fn eval_cells(flux: &FluxModel, du: &CellField) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(du.values.dim());
    for ((i, k), &p) in du.values.indexed_iter() {
        let s = flux.eval(p)?;
        if !s.is_finite() {
            return Err(Error::NonFinite { i, k });
        }
        out[[i, k]] = s;
    }
    Ok(out)
}

/// Midpoint quadrature of both squared residuals.
pub fn energy_i(w: &FieldPair, flux: &FluxModel) -> Result<EnergyBreakdown> {
    let c = cells(w);
    let sig = eval_cells(flux, &c.du)?;
    let hh = w.grid().cell_area();
    let flux_term = Zip::from(&c.vt.values).and(&sig).fold(0.0, |a, &b, &s| a + (b - s) * (b - s)) * hh;
    let div_term = Zip::from(&c.u.values).and(&c.divv.values).fold(0.0, |a, &u, &d| a + (u - d) * (u - d)) * hh;
    let e = EnergyBreakdown::new(flux_term, div_term);
    if !e.total.is_finite() {
        let (i, k) = first_non_finite(&c, &sig);
        return Err(Error::NonFinite { i, k });
    }
    Ok(e)
}

fn first_non_finite(c: &Cells, sig: &Array2<f64>) -> (usize, usize) {
    for ((i, k), &s) in sig.indexed_iter() {
        let vals = [s, c.vt.values[[i, k]], c.u.values[[i, k]], c.divv.values[[i, k]]];
        if vals.iter().any(|v| !v.is_finite()) {
            return (i, k);
        }
    }
    (0, 0)
}

/// Same quadrature with `g(Du, v_t)` in place of `|σ(Du) - v_t|²`.
pub fn energy_relaxed(w: &FieldPair, env: &EnvelopeTable) -> Result<EnergyBreakdown> {
    let c = cells(w);
    let hh = w.grid().cell_area();
    let mut flux_term = 0.0;
    for ((i, k), &p) in c.du.values.indexed_iter() {
        let beta = c.vt.values[[i, k]];
        flux_term += match g_eval(env, p, beta) {
            Ok(g) => g,
            Err(Error::OutOfRange { .. }) => return Err(Error::WindowExcursion { i, k, p, beta }),
            Err(e) => return Err(e),
        };
    }
    let div_term = Zip::from(&c.u.values).and(&c.divv.values).fold(0.0, |a, &u, &d| a + (u - d) * (u - d)) * hh;
    Ok(EnergyBreakdown::new(flux_term * hh, div_term))
}

/// Adds the transpose of a cell-centred difference applied to `c` into the
/// node array `out`.
fn scatter_diff(c: &Array2<f64>, axis: Axis, h: f64, out: &mut Array2<f64>) {
    let w = 0.5 / h;
    for ((i, k), &v) in c.indexed_iter() {
        let r = w * v;
        match axis {
            Axis::X => {
                out[[i + 1, k]] += r;
                out[[i, k]] -= r;
                out[[i + 1, k + 1]] += r;
                out[[i, k + 1]] -= r;
            }
            Axis::T => {
                out[[i, k + 1]] += r;
                out[[i, k]] -= r;
                out[[i + 1, k + 1]] += r;
                out[[i + 1, k]] -= r;
            }
        }
    }
}

/// Transpose of the four-corner average.
fn scatter_avg(c: &Array2<f64>, out: &mut Array2<f64>) {
    for ((i, k), &v) in c.indexed_iter() {
        let r = 0.25 * v;
        out[[i, k]] += r;
        out[[i + 1, k]] += r;
        out[[i, k + 1]] += r;
        out[[i + 1, k + 1]] += r;
    }
}

/// `-Dᵀ_x b - Dᵀ_t a` style adjoints for the residual module.
pub(crate) fn scatter_cell_diff(c: &Array2<f64>, axis: Axis, grid: &SpaceTimeGrid, out: &mut Array2<f64>) {
    let h = match axis {
        Axis::X => grid.hx(),
        Axis::T => grid.ht(),
    };
    scatter_diff(c, axis, h, out);
}

fn zero_boundary(a: &mut Array2<f64>, grid: &SpaceTimeGrid) {
    let (nx2, nt2) = grid.node_shape();
    for i in 0..nx2 {
        a[[i, 0]] = 0.0;
        a[[i, nt2 - 1]] = 0.0;
    }
    for k in 0..nt2 {
        a[[0, k]] = 0.0;
        a[[nx2 - 1, k]] = 0.0;
    }
}

/// Exact gradient of the discrete `I` with respect to the interior nodes
/// (boundary entries are zero).
pub fn grad_energy_i(w: &FieldPair, flux: &FluxModel) -> Result<FieldPair> {
    let g = w.grid();
    let c = cells(w);
    let sig = eval_cells(flux, &c.du)?;
    let hh = g.cell_area();
    // r2 = v_t - σ(Du), r1 = u - div v
    let r2 = &c.vt.values - &sig;
    let r1 = &c.u.values - &c.divv.values;
    let dsig = c.du.values.mapv(|p| flux.derivative(p));

    let mut gu = Array2::zeros(g.node_shape());
    let mut gv = Array2::zeros(g.node_shape());
    scatter_diff(&(&dsig * &r2 * (-2.0 * hh)), Axis::X, g.hx(), &mut gu);
    scatter_avg(&(&r1 * (2.0 * hh)), &mut gu);
    scatter_diff(&(&r2 * (2.0 * hh)), Axis::T, g.ht(), &mut gv);
    scatter_diff(&(&r1 * (-2.0 * hh)), Axis::X, g.hx(), &mut gv);
    zero_boundary(&mut gu, &g);
    zero_boundary(&mut gv, &g);
    FieldPair::new(ScalarField::new(g, gu)?, ScalarField::new(g, gv)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub tol_i: f64,
    pub init_noise: f64,
    pub seed: u64,
    /// Record the H⁻¹ residual every this many iterations (0 = never).
    pub residual_every: usize,
    pub cg_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 2000, tol_i: 1e-10, init_noise: 0.1, seed: 7, residual_every: 0, cg_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentRecord {
    pub iter: usize,
    #[serde(rename = "I")]
    pub i_total: f64,
    pub flux_term: f64,
    pub div_term: f64,
    pub grad_norm: f64,
    pub step: f64,
    #[serde(rename = "residual_Hm1")]
    pub residual_hm1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct DescentTrajectory {
    pub records: Vec<DescentRecord>,
    pub terminal: FieldPair,
    pub stop: StopReason,
    pub warnings: Vec<String>,
}

impl DescentTrajectory {
    pub fn initial(&self) -> &DescentRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &DescentRecord {
        self.records.last().expect("trajectory holds the initial record")
    }

    /// Accepted steps, i.e. records after the initial one.
    pub fn accepted_steps(&self) -> usize {
        self.records.len() - 1
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

fn axpy(w: &FieldPair, alpha: f64, d: &FieldPair) -> FieldPair {
    let mut out = w.clone();
    out.u.values.scaled_add(alpha, &d.u.values);
    out.v.values.scaled_add(alpha, &d.v.values);
    out
}

fn norm_sq(d: &FieldPair) -> f64 {
    d.u.values.iter().chain(d.v.values.iter()).map(|x| x * x).sum()
}

/// Armijo gradient descent on `I` from the anchor plus seeded uniform noise
/// on the interior nodes.
pub fn minimize_i(anchor: &FieldPair, flux: &FluxModel, opts: &MinimizeOptions) -> Result<DescentTrajectory> {
    let g = anchor.grid();
    let mut warnings = Vec::new();
    let defect = (&anchor.u.cell_values().values - &anchor.v.cell_diff(Axis::X).values)
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    if defect > 1e-8 * (1.0 + anchor.u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        warnings.push(format!("anchor violates u = div v by up to {defect:.3e}"));
    }

    let mut w = anchor.clone();
    if opts.init_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for field in [&mut w.u, &mut w.v] {
            for i in 1..=g.nx {
                for k in 1..=g.nt {
                    field.values[[i, k]] += rng.gen_range(-opts.init_noise..=opts.init_noise);
                }
            }
        }
    }

    let residual = |w: &FieldPair, iter: usize| -> Result<Option<f64>> {
        if opts.residual_every > 0 && iter.is_multiple_of(opts.residual_every) {
            Ok(Some(approx_residual(&w.u, flux, opts.cg_tol)?))
        } else {
            Ok(None)
        }
    };

    let mut e = energy_i(&w, flux)?;
    let mut grad = grad_energy_i(&w, flux)?;
    let mut gn2 = norm_sq(&grad);
    let mut records = vec![DescentRecord {
        iter: 0,
        i_total: e.total,
        flux_term: e.flux_term,
        div_term: e.div_term,
        grad_norm: gn2.sqrt(),
        step: 0.0,
        residual_hm1: residual(&w, 0)?,
    }];

    let mut stop = StopReason::MaxIter;
    for iter in 1..=opts.max_iter {
        if e.total <= opts.tol_i {
            stop = StopReason::Converged;
            break;
        }
        if gn2 == 0.0 {
            stop = StopReason::Stalled;
            break;
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = axpy(&w, -alpha, &grad);
            let et = energy_i(&trial, flux)?;
            if et.total <= e.total - ARMIJO_C * alpha * gn2 && et.total < e.total {
                break Some((trial, et));
            }
            alpha *= ARMIJO_SHRINK;
            if alpha < MIN_STEP {
                break None;
            }
        };
        let Some((trial, et)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        w = trial;
        e = et;
        grad = grad_energy_i(&w, flux)?;
        gn2 = norm_sq(&grad);
        records.push(DescentRecord {
            iter,
            i_total: e.total,
            flux_term: e.flux_term,
            div_term: e.div_term,
            grad_norm: gn2.sqrt(),
            step: alpha,
            residual_hm1: residual(&w, iter)?,
        });
    }
    if stop == StopReason::MaxIter && e.total <= opts.tol_i {
        stop = StopReason::Converged;
    }
    Ok(DescentTrajectory { records, terminal: w, stop, warnings })
}
