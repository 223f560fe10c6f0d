//! Space-time grids on `Ω_T = (0, L) × (0, T)` and the difference operators
//! used by the energy and the residual.
//!
//! Node arrays are indexed `[i, k]` with `x_i = i·h_x`, `t_k = k·h_t`. Cell
//! `(i, k)` is the square with lower-left node `(i, k)`. Cell-centred
//! derivatives average the two forward differences along the opposite edge
//! pair, and cell values average the four corners; with this choice
//! `Σ D_x v · D_t φ = Σ D_t v · D_x φ` holds exactly for every `φ` that
//! vanishes on the boundary.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    /// Domain length.
    pub l: f64,
    /// Final time.
    pub t_final: f64,
    /// Interior node counts.
    pub nx: usize,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(l: f64, t_final: f64, nx: usize, nt: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite() && t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidGrid(format!("need L, T > 0, got L={l}, T={t_final}")));
        }
        if nx < 8 || nt < 8 {
            return Err(Error::InvalidGrid(format!("need at least 8 interior nodes per axis, got {nx}x{nt}")));
        }
        Ok(Self { l, t_final, nx, nt })
    }

    /// Grid with `cx × ct` cells, i.e. `cx - 1` interior nodes in x.
    pub fn with_cells(l: f64, t_final: f64, cx: usize, ct: usize) -> Result<Self> {
        Self::new(l, t_final, cx.saturating_sub(1), ct.saturating_sub(1))
    }

    pub fn unit(cells: usize) -> Result<Self> {
        Self::with_cells(1.0, 1.0, cells, cells)
    }

    pub fn hx(&self) -> f64 {
        self.l / (self.nx + 1) as f64
    }

    pub fn ht(&self) -> f64 {
        self.t_final / (self.nt + 1) as f64
    }

    /// Node array shape `(nx + 2, nt + 2)`.
    pub fn node_shape(&self) -> (usize, usize) {
        (self.nx + 2, self.nt + 2)
    }

    /// Cell array shape `(nx + 1, nt + 1)`.
    pub fn cell_shape(&self) -> (usize, usize) {
        (self.nx + 1, self.nt + 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx + 1 {
            self.l
        } else {
            i as f64 * self.hx()
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt + 1 {
            self.t_final
        } else {
            k as f64 * self.ht()
        }
    }

    pub fn cell_x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    pub fn cell_t(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.ht()
    }

    /// `|Ω_T|`
    pub fn volume(&self) -> f64 {
        self.l * self.t_final
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.ht()
    }

    pub fn is_boundary(&self, i: usize, k: usize) -> bool {
        i == 0 || k == 0 || i == self.nx + 1 || k == self.nt + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    T,
}

/// Node values, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: SpaceTimeGrid,
    pub values: Array2<f64>,
}

/// In one space dimension the flux field `v` has one component.
pub type VectorField = ScalarField;

impl ScalarField {
    pub fn new(grid: SpaceTimeGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.node_shape() {
            return Err(Error::Shape(format!("node field {:?}, grid wants {:?}", values.dim(), grid.node_shape())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self { grid, values: Array2::zeros(grid.node_shape()) }
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn(grid.node_shape(), |(i, k)| f(grid.x(i), grid.t(k)));
        Self { grid, values }
    }

    /// Cell values as the mean of the four corners.
    pub fn cell_values(&self) -> CellField {
        let v = &self.values;
        let values = Array2::from_shape_fn(self.grid.cell_shape(), |(i, k)| {
            0.25 * (v[[i, k]] + v[[i + 1, k]] + v[[i, k + 1]] + v[[i + 1, k + 1]])
        });
        CellField { grid: self.grid, values }
    }

    /// Cell-centred derivative along `axis`.
    pub fn cell_diff(&self, axis: Axis) -> CellField {
        let v = &self.values;
        let values = match axis {
            Axis::X => {
                let h = self.grid.hx();
                Array2::from_shape_fn(self.grid.cell_shape(), |(i, k)| {
                    0.5 * ((v[[i + 1, k]] - v[[i, k]]) + (v[[i + 1, k + 1]] - v[[i, k + 1]])) / h
                })
            }
            Axis::T => {
                let h = self.grid.ht();
                Array2::from_shape_fn(self.grid.cell_shape(), |(i, k)| {
                    0.5 * ((v[[i, k + 1]] - v[[i, k]]) + (v[[i + 1, k + 1]] - v[[i + 1, k]])) / h
                })
            }
        };
        CellField { grid: self.grid, values }
    }

    /// Largest value on boundary nodes, used to check traces.
    pub fn max_abs_boundary(&self) -> f64 {
        let (nx2, nt2) = self.grid.node_shape();
        let mut m = 0.0f64;
        for i in 0..nx2 {
            for k in 0..nt2 {
                if self.grid.is_boundary(i, k) {
                    m = m.max(self.values[[i, k]].abs());
                }
            }
        }
        m
    }

    /// Discrete `L²(Ω_T)` norm of the cell values.
    pub fn l2_norm(&self) -> f64 {
        self.cell_values().l2_norm()
    }
}

/// Forward difference along one axis: the output shrinks by one node along
/// that axis and keeps every node along the other.
pub fn diff(field: &ScalarField, axis: Axis) -> Array2<f64> {
    let v = &field.values;
    match axis {
        Axis::X => (&v.slice(s![1.., ..]) - &v.slice(s![..-1, ..])) / field.grid.hx(),
        Axis::T => (&v.slice(s![.., 1..]) - &v.slice(s![.., ..-1])) / field.grid.ht(),
    }
}

/// Values at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub grid: SpaceTimeGrid,
    pub values: Array2<f64>,
}

impl CellField {
    pub fn new(grid: SpaceTimeGrid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.cell_shape() {
            return Err(Error::Shape(format!("cell field {:?}, grid wants {:?}", values.dim(), grid.cell_shape())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn(grid.cell_shape(), |(i, k)| f(grid.cell_x(i), grid.cell_t(k)));
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField { grid: self.grid, values: self.values.mapv(f) }
    }

    /// `Σ values · h_x h_t`
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    /// `∫ self · other`
    pub fn dot(&self, other: &CellField) -> f64 {
        Zip::from(&self.values).and(&other.values).fold(0.0, |acc, a, b| acc + a * b) * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Block means over `kx × kt` cells.
///
/// The result lives on the coarse cell grid, so its `grid` field describes a
/// grid whose cells are the blocks.
pub fn cell_average(field: &CellField, block: (usize, usize)) -> Result<CellField> {
    let (kx, kt) = block;
    let (cx, ct) = field.values.dim();
    if kx == 0 || kt == 0 || cx % kx != 0 || ct % kt != 0 {
        return Err(Error::Shape(format!("block {kx}x{kt} does not divide the {cx}x{ct} cell grid")));
    }
    let (bx, bt) = (cx / kx, ct / kt);
    let scale = 1.0 / (kx * kt) as f64;
    let values = Array2::from_shape_fn((bx, bt), |(a, b)| {
        field.values.slice(s![a * kx..(a + 1) * kx, b * kt..(b + 1) * kt]).sum() * scale
    });
    let g = field.grid;
    let coarse = SpaceTimeGrid { l: g.l, t_final: g.t_final, nx: bx - 1, nt: bt - 1 };
    Ok(CellField { grid: coarse, values })
}

/// A pair `w = (u, v)` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: ScalarField,
    pub v: VectorField,
}

impl FieldPair {
    pub fn new(u: ScalarField, v: VectorField) -> Result<Self> {
        if u.grid != v.grid {
            return Err(Error::Shape("u and v live on different grids".into()));
        }
        Ok(Self { u, v })
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        self.u.grid
    }

    /// Largest boundary mismatch against `anchor`.
    pub fn boundary_defect(&self, anchor: &FieldPair) -> f64 {
        let g = self.grid();
        let (nx2, nt2) = g.node_shape();
        let mut m = 0.0f64;
        for i in 0..nx2 {
            for k in 0..nt2 {
                if g.is_boundary(i, k) {
                    m = m
                        .max((self.u.values[[i, k]] - anchor.u.values[[i, k]]).abs())
                        .max((self.v.values[[i, k]] - anchor.v.values[[i, k]]).abs());
                }
            }
        }
        m
    }
}

/// Copies the anchor's boundary values into `raw`; interior nodes untouched.
pub fn impose_boundary(raw: &FieldPair, anchor: &FieldPair) -> Result<FieldPair> {
    if raw.grid() != anchor.grid() {
        return Err(Error::Shape("field and anchor live on different grids".into()));
    }
    let mut out = raw.clone();
    let g = raw.grid();
    let (nx2, nt2) = g.node_shape();
    for i in 0..nx2 {
        for k in 0..nt2 {
            if g.is_boundary(i, k) {
                out.u.values[[i, k]] = anchor.u.values[[i, k]];
                out.v.values[[i, k]] = anchor.v.values[[i, k]];
            }
        }
    }
    Ok(out)
}

/// Rows `x, t, value` at nodes.
pub fn write_field_csv(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let g = field.grid;
    write_xt_csv(path, field.values.indexed_iter().map(|((i, k), &v)| (g.x(i), g.t(k), v)))
}

/// Rows `x, t, value` at cell centres.
pub fn write_cell_csv(field: &CellField, path: impl AsRef<Path>) -> Result<()> {
    let g = field.grid;
    write_xt_csv(path, field.values.indexed_iter().map(|((i, k), &v)| (g.cell_x(i), g.cell_t(k), v)))
}

fn write_xt_csv(path: impl AsRef<Path>, rows: impl Iterator<Item = (f64, f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "t", "value"])?;
    for (x, t, v) in rows {
        w.write_record([x.to_string(), t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"WCFLD\x00\x01\x00";

/// Binary snapshot: magic, `L`, `T`, `nx`, `nt`, then node values row-major
/// (all little endian).
pub fn write_field_snapshot(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let g = field.grid;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&g.l.to_le_bytes())?;
    w.write_all(&g.t_final.to_le_bytes())?;
    w.write_all(&(g.nx as u64).to_le_bytes())?;
    w.write_all(&(g.nt as u64).to_le_bytes())?;
    for v in field.values.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_snapshot(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 40 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Cache("not a field snapshot".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes") };
    let grid = SpaceTimeGrid::new(
        f64::from_le_bytes(word(0)),
        f64::from_le_bytes(word(1)),
        u64::from_le_bytes(word(2)) as usize,
        u64::from_le_bytes(word(3)) as usize,
    )?;
    let (a, b) = grid.node_shape();
    let body = &bytes[40..];
    if body.len() != 8 * a * b {
        return Err(Error::Cache(format!("snapshot body has {} bytes, expected {}", body.len(), 8 * a * b)));
    }
    let vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    ScalarField::new(grid, Array2::from_shape_vec((a, b), vals).map_err(|e| Error::Shape(e.to_string()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::new(2.0, 1.5, 19, 13).unwrap()
    }

    #[test]
    fn affine_in_x_has_unit_slope() {
        let u = ScalarField::from_fn(grid(), |x, _| x);
        assert!(u.cell_diff(Axis::X).values.iter().all(|d| (d - 1.0).abs() < 1e-13));
        assert!(u.cell_diff(Axis::T).values.iter().all(|d| d.abs() < 1e-13));
        assert!(diff(&u, Axis::X).iter().all(|d| (d - 1.0).abs() < 1e-13));
    }

    #[test]
    fn quadratic_forward_difference_is_shifted() {
        let g = grid();
        let v = ScalarField::from_fn(g, |x, _| 0.5 * x * x);
        let d = diff(&v, Axis::X);
        assert_eq!(d.dim(), (g.nx + 1, g.nt + 2));
        for ((i, _), &val) in d.indexed_iter() {
            assert!((val - (g.x(i) + 0.5 * g.hx())).abs() < 1e-12);
        }
        let c = v.cell_diff(Axis::X);
        for ((i, _), &val) in c.values.indexed_iter() {
            assert!((val - g.cell_x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_derivative_within_taylor_bound() {
        let g = SpaceTimeGrid::with_cells(1.0, 1.0, 64, 16).unwrap();
        let u = ScalarField::from_fn(g, |x, _| (std::f64::consts::PI * x).sin());
        let d = u.cell_diff(Axis::X);
        let pi = std::f64::consts::PI;
        let err = d
            .values
            .indexed_iter()
            .map(|((i, _), &v)| (v - pi * (pi * g.cell_x(i)).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= pi * pi * g.hx() / 2.0, "{err}");
    }

    #[test]
    fn discrete_duality_is_exact() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v = ScalarField::new(g, Array2::from_shape_fn(g.node_shape(), |_| rng.gen_range(-1.0..1.0))).unwrap();
            let mut phi = ScalarField::zeros(g);
            for i in 1..=g.nx {
                for k in 1..=g.nt {
                    phi.values[[i, k]] = rng.gen_range(-1.0..1.0);
                }
            }
            let lhs = v.cell_diff(Axis::X).dot(&phi.cell_diff(Axis::T));
            let rhs = v.cell_diff(Axis::T).dot(&phi.cell_diff(Axis::X));
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn boundary_projection_touches_boundary_only() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = |rng: &mut ChaCha8Rng| Array2::from_shape_fn(g.node_shape(), |_| rng.gen::<f64>());
        let raw = FieldPair::new(ScalarField::new(g, noise(&mut rng)).unwrap(), ScalarField::new(g, noise(&mut rng)).unwrap()).unwrap();
        let anchor = FieldPair::new(ScalarField::from_fn(g, |x, _| 2.0 * x), ScalarField::from_fn(g, |x, t| x * x + t)).unwrap();
        let out = impose_boundary(&raw, &anchor).unwrap();
        assert_eq!(out.boundary_defect(&anchor), 0.0);
        for i in 1..=g.nx {
            for k in 1..=g.nt {
                assert_eq!(out.u.values[[i, k]], raw.u.values[[i, k]]);
                assert_eq!(out.v.values[[i, k]], raw.v.values[[i, k]]);
            }
        }
        assert_eq!(impose_boundary(&anchor, &anchor).unwrap(), anchor);
    }

    #[test]
    fn block_average_preserves_mean_and_constants() {
        let g = SpaceTimeGrid::with_cells(1.0, 1.0, 16, 12).unwrap();
        let c = CellField::from_fn(g, |x, t| (3.0 * x).sin() + t * t);
        let b = cell_average(&c, (4, 2)).unwrap();
        assert_eq!(b.values.dim(), (4, 6));
        assert!((b.integral() - c.integral()).abs() < 1e-13);
        assert_eq!(cell_average(&c, (1, 1)).unwrap().values, c.values);
        let k = CellField::from_fn(g, |_, _| 1.25);
        assert!(cell_average(&k, (8, 4)).unwrap().values.iter().all(|&v| (v - 1.25).abs() < 1e-15));
        assert!(matches!(cell_average(&c, (3, 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn snapshot_roundtrip() {
        let u = ScalarField::from_fn(grid(), |x, t| x.exp() * t);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        write_field_snapshot(&u, &path).unwrap();
        assert_eq!(read_field_snapshot(&path).unwrap(), u);
        write_field_csv(&u, dir.path().join("u.csv")).unwrap();
        let text = fs::read_to_string(dir.path().join("u.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 21 * 15);
    }

    #[test]
    fn grid_validation() {
        assert!(SpaceTimeGrid::new(1.0, 1.0, 7, 8).is_err());
        assert!(SpaceTimeGrid::new(0.0, 1.0, 8, 8).is_err());
        let g = SpaceTimeGrid::unit(64).unwrap();
        assert_eq!((g.nx, g.nt), (63, 63));
        assert_eq!(g.x(64), 1.0);
    }
}
