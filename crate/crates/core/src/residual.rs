//! Discrete `H⁻¹(Ω_T)` norms through a Riesz solve with the space-time
//! Laplacian, and the bound `‖u_t - div σ(Du)‖_{H⁻¹} <= √I(u, v)`.
//!
//! The test space is node functions vanishing on the whole boundary of the
//! cylinder, normed by `Σ (forward differences)² h_x h_t` over all edges.
//! Averaging forward differences onto cells is a contraction in that norm,
//! so the dual norm computed here never exceeds the one paired with the
//! cell-centred operators of the energy.

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::energy::{energy_i, scatter_cell_diff};
use crate::error::{Error, Result};
use crate::fields::{Axis, CellField, FieldPair, ScalarField, SpaceTimeGrid};
use crate::flux::FluxModel;

/// `⟨F, φ⟩ = Σ_nodes f·φ·h_x h_t + Σ_cells (-a·φ_t - b·Dφ)·h_x h_t`.
#[derive(Debug, Clone)]
pub struct DualFunctional {
    pub grid: SpaceTimeGrid,
    /// Node density (may be absent).
    pub f: Option<Array2<f64>>,
    /// Paired with `-φ_t`.
    pub a: Option<CellField>,
    /// Paired with `-Dφ`.
    pub b: Option<CellField>,
}

impl DualFunctional {
    pub fn density(f: &ScalarField) -> Self {
        Self { grid: f.grid, f: Some(f.values.clone()), a: None, b: None }
    }

    pub fn divergence_form(a: CellField, b: CellField) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::Shape("a and b live on different grids".into()));
        }
        Ok(Self { grid: a.grid, f: None, a: Some(a), b: Some(b) })
    }

    /// `u_t - div σ(Du)` with `a = u`, `b = -σ(Du)`.
    pub fn flux_residual(u: &ScalarField, flux: &FluxModel) -> Result<Self> {
        let du = u.cell_diff(Axis::X);
        let mut b = du.clone();
        for (out, &p) in b.values.iter_mut().zip(du.values.iter()) {
            *out = -flux.eval(p)?;
        }
        Self::divergence_form(u.cell_values(), b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            f: self.f.as_ref().map(|f| f * c),
            a: self.a.as_ref().map(|a| a.map(|x| c * x)),
            b: self.b.as_ref().map(|b| b.map(|x| c * x)),
        }
    }

    /// Riesz right-hand side `r_n = ⟨F, e_n⟩` on all nodes (boundary zeroed).
    fn rhs(&self) -> Array2<f64> {
        let g = &self.grid;
        let hh = g.cell_area();
        let mut r = Array2::zeros(g.node_shape());
        if let Some(a) = &self.a {
            scatter_cell_diff(&(&a.values * -hh), Axis::T, g, &mut r);
        }
        if let Some(b) = &self.b {
            scatter_cell_diff(&(&b.values * -hh), Axis::X, g, &mut r);
        }
        if let Some(f) = &self.f {
            r.scaled_add(hh, f);
        }
        let (nx2, nt2) = g.node_shape();
        r.slice_mut(s![0, ..]).fill(0.0);
        r.slice_mut(s![nx2 - 1, ..]).fill(0.0);
        r.slice_mut(s![.., 0]).fill(0.0);
        r.slice_mut(s![.., nt2 - 1]).fill(0.0);
        r
    }

    /// `⟨F, φ⟩` for a node function vanishing on the boundary.
    pub fn apply(&self, phi: &ScalarField) -> f64 {
        Zip::from(&self.rhs()).and(&phi.values).fold(0.0, |acc, r, p| acc + r * p)
    }
}

/// Matrix-free `A φ` for the 5-point Laplacian scaled by `h_x h_t` on the
/// interior block (boundary values are zero and stay zero).
fn apply_laplacian(grid: &SpaceTimeGrid, phi: &Array2<f64>, out: &mut Array2<f64>) {
    let hh = grid.cell_area();
    let cx = hh / (grid.hx() * grid.hx());
    let ct = hh / (grid.ht() * grid.ht());
    for i in 1..=grid.nx {
        for k in 1..=grid.nt {
            let c = phi[[i, k]];
            out[[i, k]] = cx * (2.0 * c - phi[[i - 1, k]] - phi[[i + 1, k]])
                + ct * (2.0 * c - phi[[i, k - 1]] - phi[[i, k + 1]]);
        }
    }
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + x * y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Riesz representer `φ*` and its solver statistics.
pub fn riesz_representer(functional: &DualFunctional, cg_tol: f64) -> Result<(ScalarField, CgStats)> {
    if !(cg_tol > 0.0) {
        return Err(Error::OutOfRange { what: "cg_tol", value: cg_tol, lo: 0.0, hi: f64::INFINITY });
    }
    let g = functional.grid;
    let b = functional.rhs();
    let mut x = Array2::zeros(g.node_shape());
    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        return Ok((ScalarField::new(g, x)?, CgStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = Array2::zeros(g.node_shape());
    let mut rr = dot(&r, &r);
    let max_iter = 10 * g.nx * g.nt;
    let mut history = Vec::new();
    for it in 1..=max_iter {
        apply_laplacian(&g, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / b_norm;
        history.push(rel);
        if rel <= cg_tol {
            return Ok((ScalarField::new(g, x)?, CgStats { iterations: it, relative_residual: rel }));
        }
        let beta = rr_new / rr;
        p *= beta;
        p += &r;
        rr = rr_new;
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::SolverDiverged { iterations: max_iter, last, history })
}

/// `‖F‖_{H⁻¹} = √⟨F, φ*⟩`.
pub fn hminus1_norm(functional: &DualFunctional, cg_tol: f64) -> Result<f64> {
    hminus1_norm_with_stats(functional, cg_tol).map(|(n, _)| n)
}

pub fn hminus1_norm_with_stats(functional: &DualFunctional, cg_tol: f64) -> Result<(f64, CgStats)> {
    let (phi, stats) = riesz_representer(functional, cg_tol)?;
    Ok((functional.apply(&phi).max(0.0).sqrt(), stats))
}

/// `‖u_t - div σ(Du)‖_{H⁻¹(Ω_T)}`.
pub fn approx_residual(u: &ScalarField, flux: &FluxModel, cg_tol: f64) -> Result<f64> {
    hminus1_norm(&DualFunctional::flux_residual(u, flux)?, cg_tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residual_hm1: f64,
    pub sqrt_i: f64,
    pub slack: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub violated: bool,
}

/// Both sides of `residual <= √I` on the same grid.
pub fn lemma_bound_check(w: &FieldPair, flux: &FluxModel, cg_tol: f64) -> Result<ResidualReport> {
    let (residual_hm1, stats) = hminus1_norm_with_stats(&DualFunctional::flux_residual(&w.u, flux)?, cg_tol)?;
    let sqrt_i = energy_i(w, flux)?.total.sqrt();
    let slack = sqrt_i - residual_hm1;
    Ok(ResidualReport {
        residual_hm1,
        sqrt_i,
        slack,
        cg_iters: stats.iterations,
        cg_tol,
        violated: slack < -(cg_tol * sqrt_i + 1e-10),
    })
}
