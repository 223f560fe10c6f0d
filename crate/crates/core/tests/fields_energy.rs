use proptest::prelude::*;

use weakclose_core::energy::{energy_i, grad_energy_i, minimize_i, MinimizeOptions};
use weakclose_core::experiments::affine_subsolution;
use weakclose_core::fields::{cell_average, Axis, FieldPair, ScalarField, SpaceTimeGrid};
use weakclose_core::FluxModel;

fn field(grid: SpaceTimeGrid, c: &[f64]) -> ScalarField {
    let c = c.to_vec();
    ScalarField::from_fn(grid, move |x, t| {
        c[0] + c[1] * x + c[2] * t + c[3] * (3.0 * x).sin() * (2.0 * t).cos() + c[4] * x * x * t
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_duality_holds_for_any_fields(cv in coeffs(), cp in coeffs(), nx in 9usize..20, nt in 9usize..20) {
        let g = SpaceTimeGrid::with_cells(1.3, 0.7, nx, nt).unwrap();
        let v = field(g, &cv);
        // φ vanishing on the boundary
        let mut p = field(g, &cp);
        for i in 0..g.nx + 2 {
            for k in 0..g.nt + 2 {
                if g.is_boundary(i, k) {
                    p.values[[i, k]] = 0.0;
                }
            }
        }
        let lhs = v.cell_diff(Axis::X).dot(&p.cell_diff(Axis::T));
        let rhs = v.cell_diff(Axis::T).dot(&p.cell_diff(Axis::X));
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn energy_is_nonnegative_and_splits(cu in coeffs(), cv in coeffs()) {
        let g = SpaceTimeGrid::unit(12).unwrap();
        let w = FieldPair::new(field(g, &cu), field(g, &cv)).unwrap();
        for f in [FluxModel::linear(0.7), FluxModel::rational_bump(4.0, 1.0).unwrap(), FluxModel::hollig()] {
            let e = energy_i(&w, &f).unwrap();
            prop_assert!(e.flux_term >= 0.0 && e.div_term >= 0.0);
            prop_assert!((e.total - e.flux_term - e.div_term).abs() <= 1e-12 * (1.0 + e.total));
        }
    }

    #[test]
    fn gradient_matches_directional_differences(cu in coeffs(), cv in coeffs(), cd in coeffs()) {
        let g = SpaceTimeGrid::unit(10).unwrap();
        let w = FieldPair::new(field(g, &cu), field(g, &cv)).unwrap();
        let mut d = FieldPair::new(field(g, &cd), field(g, &cu)).unwrap();
        for f in [&mut d.u, &mut d.v] {
            for i in 0..g.nx + 2 {
                for k in 0..g.nt + 2 {
                    if g.is_boundary(i, k) {
                        f.values[[i, k]] = 0.0;
                    }
                }
            }
        }
        let flux = FluxModel::rational_bump(4.0, 1.0).unwrap();
        let grad = grad_energy_i(&w, &flux).unwrap();
        let an = (&grad.u.values * &d.u.values).sum() + (&grad.v.values * &d.v.values).sum();
        let at = |s: f64| {
            let mut x = w.clone();
            x.u.values.scaled_add(s, &d.u.values);
            x.v.values.scaled_add(s, &d.v.values);
            energy_i(&x, &flux).unwrap().total
        };
        let h = 1e-5;
        let fd = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((an - fd).abs() <= 1e-5 * an.abs().max(fd.abs()).max(1e-3), "{an} vs {fd}");
    }

    #[test]
    fn block_average_preserves_the_integral(c in coeffs()) {
        let g = SpaceTimeGrid::with_cells(2.0, 1.0, 24, 12).unwrap();
        let f = field(g, &c).cell_values();
        let avg = cell_average(&f, (4, 3)).unwrap();
        let total: f64 = avg.values.sum() * 4.0 * 3.0 * g.cell_area();
        prop_assert!((total - f.integral()).abs() <= 1e-10 * (1.0 + f.integral().abs()));
    }
}

#[test]
fn affine_anchor_on_the_graph_has_zero_energy() {
    let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
    let g = SpaceTimeGrid::unit(16).unwrap();
    for p in [-1.0, 0.0, 0.3, 2.0] {
        let (w, rep) = affine_subsolution(p, f.eval(p).unwrap(), g);
        assert!(energy_i(&w, &f).unwrap().total < 1e-20, "p = {p}");
        assert_eq!(rep.beta, f.eval(p).unwrap());
    }
    // off the graph the flux term is the squared gap times the volume
    let (w, _) = affine_subsolution(0.0, 1.0, g);
    assert!((energy_i(&w, &f).unwrap().total - g.volume()).abs() < 1e-12);
}

#[test]
fn descent_keeps_the_boundary_and_never_increases() {
    let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
    let g = SpaceTimeGrid::unit(16).unwrap();
    let (anchor, _) = affine_subsolution(0.0, 1.0, g);
    let t = minimize_i(&anchor, &f, &MinimizeOptions { max_iter: 200, ..Default::default() }).unwrap();
    assert!(t.records.windows(2).all(|r| r[1].i_total <= r[0].i_total));
    assert_eq!(t.terminal.boundary_defect(&anchor), 0.0);
    assert!(t.last().i_total < t.initial().i_total);
}
