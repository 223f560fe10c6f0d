use std::f64::consts::PI;

use proptest::prelude::*;

use weakclose_core::fields::{FieldPair, ScalarField, SpaceTimeGrid};
use weakclose_core::residual::{approx_residual, hminus1_norm, lemma_bound_check, DualFunctional};
use weakclose_core::FluxModel;

fn smooth(grid: SpaceTimeGrid, c: &[f64]) -> ScalarField {
    let c = c.to_vec();
    ScalarField::from_fn(grid, move |x, t| {
        c[0] * x + c[1] * t + c[2] * (PI * x).sin() * (PI * t).cos() + c[3] * (2.0 * PI * x).cos() * t + c[4] * x * t * t
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_never_exceeds_root_energy(cu in coeffs(), cv in coeffs(), n in 10usize..28) {
        let g = SpaceTimeGrid::unit(n).unwrap();
        let w = FieldPair::new(smooth(g, &cu), smooth(g, &cv)).unwrap();
        for f in [FluxModel::linear(1.0), FluxModel::rational_bump(4.0, 1.0).unwrap(), FluxModel::hollig()] {
            let r = lemma_bound_check(&w, &f, 1e-10).unwrap();
            prop_assert!(!r.violated, "{r:?}");
            prop_assert!(r.residual_hm1 <= r.sqrt_i + 1e-8);
        }
    }

    #[test]
    fn norm_is_homogeneous_and_subadditive(ca in coeffs(), cb in coeffs(), s in -3.0f64..3.0) {
        let g = SpaceTimeGrid::unit(16).unwrap();
        let fa = DualFunctional::density(&smooth(g, &ca));
        let fb = DualFunctional::density(&smooth(g, &cb));
        let na = hminus1_norm(&fa, 1e-12).unwrap();
        let nb = hminus1_norm(&fb, 1e-12).unwrap();
        prop_assert!((hminus1_norm(&fa.scaled(s), 1e-12).unwrap() - s.abs() * na).abs() <= 1e-8 * (1.0 + na));
        let sum = DualFunctional::density(&ScalarField::new(g, &smooth(g, &ca).values + &smooth(g, &cb).values).unwrap());
        prop_assert!(hminus1_norm(&sum, 1e-12).unwrap() <= na + nb + 1e-8);
    }
}

#[test]
fn eigenfunction_norm_matches_closed_form() {
    let exact = 1.0 / (2.0 * 2f64.sqrt() * PI);
    let g = SpaceTimeGrid::unit(64).unwrap();
    let f = DualFunctional::density(&ScalarField::from_fn(g, |x, t| (PI * x).sin() * (PI * t).sin()));
    let n = hminus1_norm(&f, 1e-12).unwrap();
    assert!((n - exact).abs() / exact < 2e-3, "{n} vs {exact}");
}

#[test]
fn zero_flux_residual_is_bounded_by_poincare() {
    // with σ = 0 the residual is ‖u_t‖ in H⁻¹, here u_t = sin(πx)
    let g = SpaceTimeGrid::unit(32).unwrap();
    let u = ScalarField::from_fn(g, |x, t| (PI * x).sin() * t);
    let r = approx_residual(&u, &FluxModel::linear(0.0), 1e-12).unwrap();
    let l2 = ScalarField::from_fn(g, |x, _| (PI * x).sin()).l2_norm();
    // Poincaré in t on (0, 1): ‖f‖_{H⁻¹} <= ‖f‖_{L²} / π
    assert!(r > 0.0 && r <= l2 / PI * 1.01, "{r} vs {l2}");
}
