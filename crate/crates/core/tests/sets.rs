use proptest::prelude::*;

use weakclose_core::hulls::{convex_envelope, g_eval, residual_surface, sigma_interval, z_interval};
use weakclose_core::{gamma_interval, monotone_set, FluxModel, IntervalSet, Window};

fn bump() -> FluxModel {
    FluxModel::rational_bump(4.0, 1.0).unwrap()
}

/// Pairwise monotonicity on the window nodes, brute force.
fn pairwise_lambda(f: &FluxModel, w: &Window) -> Vec<bool> {
    let nodes: Vec<f64> = (0..w.padded_len()).map(|i| w.padded_node(i)).collect();
    w.nodes()
        .map(|p| {
            let sp = f.eval_unchecked(p);
            nodes.iter().all(|&q| (f.eval_unchecked(q) - sp) * (q - p) >= -1e-12)
        })
        .collect()
}

#[test]
fn lambda_matches_pairwise_definition() {
    for f in [bump(), FluxModel::hollig(), FluxModel::linear(2.0), FluxModel::linear(-1.0)] {
        let w = Window::new(-3.0, 7.0, 201, 40.0).unwrap();
        let l = monotone_set(&f, &w);
        let brute = pairwise_lambda(&f, &w);
        for (p, member) in w.nodes().zip(brute) {
            let h = w.spacing();
            if member {
                assert!(l.contains(p, 0.51 * h), "{p} should be in {l:?}");
            }
        }
    }
}

#[test]
fn decreasing_flux_has_empty_lambda_and_full_gamma() {
    let f = FluxModel::linear(-1.0);
    let w = Window::new(-2.0, 2.0, 65, 0.5).unwrap();
    let l = monotone_set(&f, &w);
    assert!(l.is_empty());
    let g = gamma_interval(&f, &l, 0.3, (-5.0, 5.0));
    assert_eq!(g, IntervalSet::single(-5.0, 5.0, true, true));
}

#[test]
fn hollig_gamma_is_the_gap_between_branches() {
    let f = FluxModel::hollig();
    let w = Window::new(-2.0, 8.0, 1001, 2.5).unwrap();
    let l = monotone_set(&f, &w);
    let h = w.spacing();
    for p in [1.5, 2.0, 3.0, 4.5] {
        let (lo, hi) = gamma_interval(&f, &l, p, (-10.0, 10.0)).bounds().unwrap();
        assert!((lo - 1.0).abs() <= 2.0 * h && (hi - 2.0).abs() <= 2.0 * h, "Γ({p}) = [{lo}, {hi}]");
    }
    // inside a monotone branch Γ(p) = {σ(p)}
    let g = gamma_interval(&f, &l, -1.0, (-10.0, 10.0));
    assert!(g.width() <= 2.0 * h);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_contains_the_flux_value(p in -3.0f64..3.0) {
        for f in [bump(), FluxModel::hollig(), FluxModel::linear(1.5)] {
            let w = Window::new(-4.0, 8.0, 241, 3.0).unwrap();
            let l = monotone_set(&f, &w);
            let s = f.eval(p).unwrap();
            let g = gamma_interval(&f, &l, p, (-20.0, 20.0));
            prop_assert!(g.is_well_formed());
            prop_assert!(g.contains(s, 1e-9 + 0.1 * w.spacing() * f.lipschitz_on(-4.0, 8.0)), "{s} not in {g:?}");
        }
    }

    #[test]
    fn lambda_is_sorted_and_disjoint(amp in 0.5f64..5.0, scale in 0.3f64..3.0) {
        let f = FluxModel::rational_bump(amp, scale).unwrap();
        let l = monotone_set(&f, &Window::new(-6.0, 6.0, 257, 3.0).unwrap());
        prop_assert!(l.is_well_formed());
        // the origin is always monotone for an odd bump, and it is the only such point
        prop_assert_eq!(l.intervals.len(), 1);
        prop_assert!(l.intervals[0].0.abs() < 0.05 && l.intervals[0].1.abs() < 0.05);
    }
}

#[test]
fn sigma_is_inside_both_sets_and_contains_the_graph() {
    let f = bump();
    let wp = Window::new(-2.0, 2.0, 129, 48.0).unwrap();
    let wb = Window::new(-2.5, 2.5, 129, 1.25).unwrap();
    let env = convex_envelope(&residual_surface(&f, &wp, &wb).unwrap());
    let l = monotone_set(&f, &Window::new(-6.0, 6.0, 257, 3.0).unwrap());
    let tol = env.default_zero_tol();
    for p in [-1.5, -0.5, 0.0, 0.25, 1.0, 1.75] {
        let s = sigma_interval(&f, &env, &l, p).unwrap();
        let z = z_interval(&env, p, tol).unwrap();
        let g = gamma_interval(&f, &l, p, env.beta_range());
        let (lo, hi) = s.bounds().unwrap();
        assert!(z.contains(lo, 1e-12) && z.contains(hi, 1e-12) && g.contains(lo, 1e-12) && g.contains(hi, 1e-12));
        assert!(g_eval(&env, p, f.eval(p).unwrap()).unwrap() <= tol);
        assert!(s.contains(f.eval(p).unwrap(), 1e-9), "σ({p}) outside {s:?}");
    }
}
