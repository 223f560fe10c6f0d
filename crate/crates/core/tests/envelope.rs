use proptest::prelude::*;

use weakclose_core::hulls::{
    convex_envelope, g_eval, read_envelope_bin, reconvexify, residual_surface, write_envelope_bin, z_interval,
};
use weakclose_core::{FluxModel, Window};

fn knots_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(-2.0f64..2.0, 3..6).prop_map(|ys| {
        let n = ys.len();
        ys.into_iter().enumerate().map(|(i, y)| (-1.5 + 3.0 * i as f64 / (n - 1) as f64, y)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn envelope_is_a_convex_minorant(knots in knots_strategy()) {
        let f = FluxModel::piecewise_linear(knots).unwrap();
        let wp = Window::new(-2.0, 2.0, 41, 1.0).unwrap();
        let wb = Window::new(-3.0, 3.0, 41, 1.5).unwrap();
        let surface = residual_surface(&f, &wp, &wb).unwrap();
        let env = convex_envelope(&surface);
        let off = ((surface.p_axis.len() - 41) / 2, (surface.beta_axis.len() - 41) / 2);
        let scale = env.meta.max_f.max(1.0);
        for i in 0..41 {
            for k in 0..41 {
                let g = env.values[[i, k]];
                prop_assert!(g >= 0.0);
                prop_assert!(g <= surface.values[[i + off.0, k + off.1]] + 1e-9 * scale);
            }
        }
        // midpoint convexity along both axes and both diagonals
        for i in 1..40 {
            for k in 1..40 {
                let c = env.values[[i, k]];
                for (di, dk) in [(1, 0), (0, 1), (1, 1), (1, -1i64)] {
                    let a = env.values[[(i as i64 - di) as usize, (k as i64 - dk) as usize]];
                    let b = env.values[[(i as i64 + di) as usize, (k as i64 + dk) as usize]];
                    prop_assert!(2.0 * c <= a + b + 1e-9 * scale);
                }
            }
        }
        let again = reconvexify(&env);
        let idem = env.values.iter().zip(again.values.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(idem <= 1e-12 * scale);
    }

    #[test]
    fn zero_set_contains_the_graph(slope in 0.2f64..3.0, p in -1.5f64..1.5) {
        let f = FluxModel::linear(slope);
        let wp = Window::new(-2.0, 2.0, 65, 1.0).unwrap();
        let wb = Window::new(-6.5, 6.5, 97, 2.0).unwrap();
        let env = convex_envelope(&residual_surface(&f, &wp, &wb).unwrap());
        let z = z_interval(&env, p, env.default_zero_tol()).unwrap();
        prop_assert!(z.contains(slope * p, 1e-9));
        // the monotone flux has a thin zero set
        prop_assert!(z.width() <= 2.0 * env.default_zero_tol().sqrt() + 2.0 * env.meta.h_beta);
    }
}

#[test]
fn linear_envelope_reproduces_the_square() {
    let f = FluxModel::linear(1.0);
    let w = Window::new(-3.0, 3.0, 97, 1.5).unwrap();
    let env = convex_envelope(&residual_surface(&f, &w, &w).unwrap());
    for p in [-2.0, -0.5, 0.0, 1.25] {
        for b in [-1.0, 0.0, 0.5, 2.0] {
            let g = g_eval(&env, p, b).unwrap();
            // bilinear interpolation of a quadratic overshoots by at most h²/2
            assert!((g - (p - b) * (p - b)).abs() <= env.meta.h_p * env.meta.h_p, "{p} {b} {g}");
        }
    }
}

#[test]
fn binary_cache_roundtrip_is_bit_exact() {
    let f = FluxModel::rational_bump(4.0, 1.0).unwrap();
    let wp = Window::new(-2.0, 2.0, 33, 8.0).unwrap();
    let wb = Window::new(-2.5, 2.5, 33, 1.0).unwrap();
    let env = convex_envelope(&residual_surface(&f, &wp, &wb).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.bin");
    write_envelope_bin(&env, &path).unwrap();
    let back = read_envelope_bin(&path).unwrap();
    assert_eq!(back.values, env.values);
    assert_eq!(back.boundary, env.boundary);
    assert_eq!(back.meta, env.meta);
    assert_eq!(back.p_axis, env.p_axis);
}
