use pharm_core::exponents::{
    criticality_ratio, epsilon_k, exponent_table, gamma_ratio, holder_c2_range, lambda_k,
    solve_threshold, PLaplaceParams,
};
use proptest::prelude::*;

const P0: f64 = 9.525207975366798;

proptest! {
    #[test]
    fn lambda_increases_with_k(p in 1.01f64..60.0, n in 1u32..4) {
        let params = PLaplaceParams::new(p, n).unwrap();
        let table = exponent_table(&params, n + 8).unwrap();
        prop_assert!(table.lambda_increasing());
    }

    #[test]
    fn n1_exponents_are_positive_and_mixing_is_bounded(p in 1.001f64..200.0, k in 2u32..12) {
        let params = PLaplaceParams::new(p, 1).unwrap();
        let lambda = lambda_k(&params, k).unwrap();
        let eps = epsilon_k(&params, k).unwrap();
        prop_assert!(lambda > 0.0);
        prop_assert!(eps.abs() < 1.0);
    }

    #[test]
    fn n1_mixing_sign_follows_p_minus_2(p in 1.001f64..200.0, k in 2u32..12) {
        prop_assume!((p - 2.0).abs() > 1e-6);
        let eps = epsilon_k(&PLaplaceParams::new(p, 1).unwrap(), k).unwrap();
        prop_assert_eq!(eps > 0.0, p > 2.0);
    }

    #[test]
    fn laplace_case_collapses(n in 1u32..6, offset in 1u32..10) {
        let params = PLaplaceParams::new(2.0, n).unwrap();
        let k = n + offset;
        prop_assert_eq!(lambda_k(&params, k).unwrap(), f64::from(k - n));
        prop_assert_eq!(epsilon_k(&params, k).unwrap(), 0.0);
    }

    #[test]
    fn criticality_ratio_crosses_one_only_at_p0(p in 1.001f64..100.0) {
        prop_assume!((p - P0).abs() > 1e-6);
        let r = criticality_ratio(&PLaplaceParams::new(p, 1).unwrap()).unwrap();
        prop_assert_eq!(r > 1.0, p < P0);
    }

    #[test]
    fn gamma_ratio_is_finite_and_positive(p in 1.001f64..100.0, n in 1u32..5) {
        let g = gamma_ratio(&PLaplaceParams::new(p, n).unwrap());
        prop_assert!(g.is_finite() && g > 0.0);
    }
}

#[test]
fn holder_ranges() {
    let (lo, hi) = holder_c2_range::<f64>(1).unwrap();
    assert_eq!(lo, 1.0);
    assert!((hi - 2.0).abs() < 1e-8);
    let (_, hi) = holder_c2_range::<f64>(2).unwrap();
    assert!((hi - 9.0).abs() < 1e-8);
    let (_, hi) = holder_c2_range::<f64>(3).unwrap();
    assert!(hi.is_infinite());
}

#[test]
fn gamma_ratio_exceeds_one_inside_the_range() {
    for (n, hi) in [(1u32, 2.0), (2, 9.0)] {
        let inside = gamma_ratio(&PLaplaceParams::new(hi - 0.1, n).unwrap());
        let outside = gamma_ratio(&PLaplaceParams::new(hi + 0.1, n).unwrap());
        assert!(inside > 1.0 && outside < 1.0, "n = {n}");
    }
    for p in [1.5, 9.0, 50.0, 200.0] {
        assert!(gamma_ratio(&PLaplaceParams::new(p, 3).unwrap()) > 1.0);
    }
}

#[test]
fn threshold_is_deterministic_and_tight() {
    let a = solve_threshold::<f64>(1, 1e-9).unwrap();
    let b = solve_threshold::<f64>(1, 1e-9).unwrap();
    assert_eq!(a, b);
    assert!((a.value - P0).abs() < 1e-9);
    assert!(a.bracket.0 <= a.value && a.value <= a.bracket.1);
    assert!(a.bracket.1 - a.bracket.0 <= 1e-9);
    assert!(a.residual.abs() <= 1e-9);

    let two = solve_threshold::<f64>(2, 1e-9).unwrap();
    assert!(two.value > P0);
    assert!(solve_threshold::<f64>(5, 1e-9).is_err());
}

#[test]
fn single_precision_threshold() {
    let t = solve_threshold::<f32>(1, 1e-5).unwrap();
    assert!((f64::from(t.value) - P0).abs() < 1e-4);
}
