use pharm_core::hodograph::{presets, HodographSeries};
use pharm_core::oracle::{
    compare_fields, solve_dirichlet_amv, solve_dirichlet_variational, GridField,
};
use pharm_core::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference(s: &HodographSeries<f64>, size: usize, strip: usize) -> GridField<f64> {
    let half = 0.9 * s.image_inradius(512) / 2f64.sqrt();
    GridField::centered_square(Complex::new(0.0, 0.0), half, size, strip)
        .unwrap()
        .sampled(s)
        .unwrap()
}

fn random_boundary(seed: u64, size: usize, strip: usize) -> (GridField<f64>, GridField<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut low = GridField::centered_square(Complex::new(0.0, 0.0), 1.0, size, strip).unwrap();
    let mut high = low.clone();
    for k in 0..low.values.len() {
        if low.boundary_mask[k] {
            let v = rng.gen_range(-1.0..1.0);
            low.values[k] = v;
            high.values[k] = v + rng.gen_range(0.0..0.5);
        }
    }
    (low, high)
}

#[test]
fn variational_error_shrinks_under_refinement() {
    let s = presets::worst_case(4.0).unwrap();
    let errors: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&n| {
            let r = reference(&s, n, 1);
            let (sol, rep) = solve_dirichlet_variational(&r, 4.0, 1e-9, 50_000).unwrap();
            assert!(rep.converged);
            compare_fields(&sol, &r).unwrap().max_abs
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn harmonic_series_is_reproduced() {
    let s = presets::harmonic::<f64>();
    let errors: Vec<f64> = [17, 33]
        .iter()
        .map(|&n| {
            let r = reference(&s, n, 1);
            let (sol, _) = solve_dirichlet_variational(&r, 2.0, 1e-11, 50_000).unwrap();
            compare_fields(&sol, &r).unwrap().max_abs
        })
        .collect();
    // Re z^2 is reproduced exactly by the five-point scheme.
    assert!(errors.iter().all(|e| *e < 1e-10), "{errors:?}");
}

#[test]
fn energy_decreases_on_hodograph_data() {
    let s = presets::worst_case(4.0).unwrap();
    let r = reference(&s, 33, 1);
    let (_, rep) = solve_dirichlet_variational(&r, 4.0, 1e-9, 50_000).unwrap();
    assert!(rep.energy_history.len() == rep.iterations + 1);
    for w in rep.energy_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-13));
    }
}

#[test]
fn mean_value_iteration_tracks_the_variational_solution() {
    // Disk discretization error estimated from the same physical disk at half
    // the spacing.
    let s = presets::worst_case(4.0).unwrap();
    let coarse_ref = reference(&s, 33, 1);
    let (var, _) = solve_dirichlet_variational(&coarse_ref, 4.0, 1e-9, 50_000).unwrap();
    let (amv, rep) = solve_dirichlet_amv(
        &coarse_ref.with_boundary_strip(2).unwrap(),
        4.0,
        2,
        1e-11,
        200_000,
    )
    .unwrap();
    assert!(rep.converged);
    let fine_ref = reference(&s, 65, 4);
    let (fine, rep) = solve_dirichlet_amv(&fine_ref, 4.0, 4, 1e-11, 200_000).unwrap();
    assert!(rep.converged);
    let mut disc: f64 = 0.0;
    for j in 0..33 {
        for i in 0..33 {
            disc = disc.max((amv.value(i, j) - fine.value(2 * i, 2 * j)).abs());
        }
    }
    let gap = compare_fields(&amv, &var).unwrap().max_abs;
    assert!(gap < 3.0 * disc, "gap {gap:e}, discretization {disc:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn raising_boundary_data_raises_the_variational_solution(seed in 0u64..1000, p in prop::sample::select(vec![1.5, 2.0, 4.0])) {
        let (low, high) = random_boundary(seed, 17, 1);
        let (a, ra) = solve_dirichlet_variational(&low, p, 1e-9, 100_000).unwrap();
        let (b, rb) = solve_dirichlet_variational(&high, p, 1e-9, 100_000).unwrap();
        prop_assert!(ra.converged && rb.converged);
        for k in 0..a.values.len() {
            prop_assert!(a.values[k] <= b.values[k] + 1e-8);
        }
    }

    #[test]
    fn raising_boundary_data_raises_the_mean_value_solution(seed in 0u64..1000, p in prop::sample::select(vec![2.0, 4.0, 8.0])) {
        let (low, high) = random_boundary(seed, 17, 2);
        let (a, _) = solve_dirichlet_amv(&low, p, 2, 1e-12, 100_000).unwrap();
        let (b, _) = solve_dirichlet_amv(&high, p, 2, 1e-12, 100_000).unwrap();
        for k in 0..a.values.len() {
            prop_assert!(a.values[k] <= b.values[k] + 1e-10);
        }
    }
}
