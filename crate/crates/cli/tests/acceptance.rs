//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::time::{Duration, Instant};

use pharm_core::exponents::{epsilon_k, holder_c2_range, lambda_k, PLaplaceParams};
use pharm_core::hodograph::{presets, HodographSeries};
use pharm_core::meanvalue::{
    decay_ladder, disk_statistics, fit_power_law, AronssonField, LadderConfig,
};
use pharm_core::oracle::{compare_fields, solve_dirichlet_amv, solve_dirichlet_variational};
use pharm_core::{Complex, GridField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

fn threshold_reproduction() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_pharm"))
        .args(["threshold", "--n", "1"])
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let Some(value) = json["value"].as_f64() else {
        return outcome(false, format!("exit {:?}, no value", out.status.code()));
    };
    let err = (value - 9.52520797).abs();
    outcome(
        out.status.success() && err < 1e-7 && within(Duration::from_secs(1), elapsed),
        format!("p0 = {value:.12}, |error| = {err:.1e}, {elapsed:.2?}"),
    )
}

fn holder_table() -> Outcome {
    let start = Instant::now();
    let ranges: Vec<(f64, f64)> = (1..=3)
        .map(|n| holder_c2_range::<f64>(n).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let expected = [(1.0, 2.0), (1.0, 9.0), (1.0, f64::INFINITY)];
    let ok = ranges.iter().zip(&expected).all(|(got, want)| {
        let end = |a: f64, b: f64| {
            if b.is_finite() {
                (a - b).abs() < 1e-8
            } else {
                a == b
            }
        };
        end(got.0, want.0) && end(got.1, want.1)
    });
    outcome(
        ok && within(Duration::from_secs(1), elapsed),
        format!("ranges {ranges:?}, {elapsed:.2?}"),
    )
}

fn identities_at_p_two() -> Outcome {
    let params = PLaplaceParams::new(2.0, 1).unwrap();
    let mut worst: f64 = 0.0;
    for k in 2..=8 {
        let l = lambda_k(&params, k).unwrap();
        let e = epsilon_k(&params, k).unwrap();
        let want = f64::from(k - 1);
        worst = worst
            .max((l - want).abs() / (f64::EPSILON * want))
            .max(e.abs() / f64::EPSILON);
    }
    outcome(worst <= 1.0, format!("largest deviation {worst} ulp"))
}

fn epsilon_sign() -> Outcome {
    let e3 = |p: f64| epsilon_k(&PLaplaceParams::new(p, 1).unwrap(), 3).unwrap();
    let (below, above) = (e3(1.9), e3(2.1));
    outcome(
        below < 0.0 && above > 0.0 && above < 1.0,
        format!("eps_3(1.9) = {below:.6}, eps_3(2.1) = {above:.6}"),
    )
}

fn main_term_symmetry() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in [3.0f64, 4.0, 6.0] {
        let s = presets::main_term(p).unwrap();
        for eps in [0.2, 0.1, 0.05] {
            let st = disk_statistics(&s, Complex::new(0.0, 0.0), eps, 64).unwrap();
            worst = worst.max(st.mean.abs().max(st.midrange.abs()) / (eps * eps));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && within(Duration::from_secs(30), elapsed),
        format!("max |mean|, |midrange| / eps^2 = {worst:.1e}, {elapsed:.2?}"),
    )
}

fn positive_verification() -> Outcome {
    let start = Instant::now();
    let s = presets::worst_case(4.0f64).unwrap();
    let cfg = LadderConfig::new(0.5 * s.image_inradius(512), 8, 0.7, 32).unwrap();
    let rep = decay_ladder(&s, Some(4.0), Complex::new(0.0, 0.0), &cfg).unwrap();
    let elapsed = start.elapsed();
    let params = s.params();
    let (l2, l3) = (lambda_k(params, 2).unwrap(), lambda_k(params, 3).unwrap());
    let predicted = 1.0 + l3 / (l2 * l2);
    let slope = rep.fitted_exponent;
    outcome(
        rep.reliable()
            && slope >= 2.05
            && (slope - predicted).abs() < 0.1
            && within(Duration::from_secs(120), elapsed),
        format!(
            "fitted {slope:.4}, predicted {predicted:.4}, residual {:.1e}, {elapsed:.2?}",
            rep.fit_residual
        ),
    )
}

fn counterexample() -> Outcome {
    let start = Instant::now();
    let cfg = LadderConfig::<f64>::new(0.1, 8, 0.7, 64).unwrap();
    let off = decay_ladder(&AronssonField, None, Complex::new(1.0, 0.0), &cfg).unwrap();
    let at_origin = decay_ladder(&AronssonField, None, Complex::new(0.0, 0.0), &cfg).unwrap();
    let elapsed = start.elapsed();
    outcome(
        (off.fitted_exponent - 2.0).abs() <= 0.05
            && off.fitted_coefficient > 0.0
            && at_origin.floor_hit
            && within(Duration::from_secs(30), elapsed),
        format!(
            "at (1,0) fitted {:.4}, coefficient {:.4}; at (0,0) floor hit {}, {elapsed:.2?}",
            off.fitted_exponent, off.fitted_coefficient, at_origin.floor_hit
        ),
    )
}

fn random_zeta(rng: &mut ChaCha8Rng, radius: f64) -> Complex<f64> {
    Complex::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU))
}

fn du(s: &HodographSeries<f64>, zeta: Complex<f64>, v: Complex<f64>) -> f64 {
    let d = s.wirtinger_derivatives(zeta).unwrap();
    let dh = d.d_zeta * v + d.d_zetabar * v.conj();
    (2.0 * zeta.powi(s.params().n() as i32) * dh).re
}

fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn u_by_quadrature(s: &HodographSeries<f64>, zeta: Complex<f64>, gl: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..80 {
        let lo = hi * 0.5;
        let (mid, half) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
        for &(x, w) in gl {
            total += w * half * du(s, zeta * (mid + half * x), zeta);
        }
        hi = lo;
    }
    total
}

fn hodograph_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gl = gauss_legendre(12);
    let (mut trip, mut lp, mut quad, mut grad): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for s in [presets::worst_case(4.0).unwrap(), presets::n2(4.0).unwrap()] {
        let n = s.params().n() as i32;
        let trust = s.trust_radius();
        for _ in 0..200 {
            let zeta = random_zeta(&mut rng, trust);
            trip = trip.max((s.invert_h(s.eval_h(zeta).unwrap(), None).unwrap() - zeta).norm());
        }
        for _ in 0..20 {
            let center = random_zeta(&mut rng, 0.5 * trust);
            let rho = rng.gen_range(0.05..0.95) * (trust - center.norm());
            let m = 4096;
            let sum: f64 = (0..m)
                .map(|j| {
                    let e = Complex::from_polar(1.0, TAU * j as f64 / m as f64);
                    du(&s, center + e * rho, Complex::<f64>::i() * e * rho)
                })
                .sum::<f64>()
                * TAU
                / m as f64;
            lp = lp.max(sum.abs());
        }
        for _ in 0..100 {
            let zeta = random_zeta(&mut rng, trust);
            quad = quad.max((s.eval_u(zeta).unwrap() - u_by_quadrature(&s, zeta, &gl)).abs());
        }
        for _ in 0..100 {
            let zeta = random_zeta(&mut rng, 0.9 * trust);
            let z = s.eval_h(zeta).unwrap();
            let h = 1e-6 * z.norm();
            let f = |dz: Complex<f64>| s.eval_u_at_z(z + dz).unwrap();
            let gx = (f(Complex::new(h, 0.0)) - f(Complex::new(-h, 0.0))) / (2.0 * h);
            let gy = (f(Complex::new(0.0, h)) - f(Complex::new(0.0, -h))) / (2.0 * h);
            let zn = zeta.powi(n);
            let (ex, ey) = (2.0 * zn.re, -2.0 * zn.im);
            grad = grad.max((gx - ex).hypot(gy - ey) / ex.hypot(ey));
        }
    }
    outcome(
        trip <= 1e-10 && lp <= 1e-8 && quad <= 1e-9 && grad <= 1e-6,
        format!(
            "round trip {trip:.1e}, loops {lp:.1e}, quadrature {quad:.1e}, gradient {grad:.1e}"
        ),
    )
}

fn reference(s: &HodographSeries<f64>, size: usize) -> GridField {
    let half = 0.9 * s.image_inradius(512) / 2f64.sqrt();
    GridField::centered_square(Complex::new(0.0, 0.0), half, size, 1)
        .unwrap()
        .sampled(s)
        .unwrap()
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let s = presets::worst_case(4.0).unwrap();
    let coarse = reference(&s, 65);
    let (var65, r65) = solve_dirichlet_variational(&coarse, 4.0, 1e-9, 200_000).unwrap();
    let fine = reference(&s, 129);
    let (var129, r129) = solve_dirichlet_variational(&fine, 4.0, 1e-9, 200_000).unwrap();
    let (amv, ra) = solve_dirichlet_amv(
        &coarse.with_boundary_strip(3).unwrap(),
        4.0,
        3,
        1e-9,
        200_000,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let e65 = compare_fields(&var65, &coarse).unwrap().rel_l2;
    let e129 = compare_fields(&var129, &fine).unwrap().rel_l2;
    let mutual = compare_fields(&amv, &var65).unwrap().rel_l2;
    outcome(
        r65.converged
            && r129.converged
            && ra.converged
            && e65 < 2e-2
            && e129 < e65
            && mutual < 1e-2
            && within(Duration::from_secs(300), elapsed),
        format!(
            "rel_l2 65: {e65:.2e}, 129: {e129:.2e}; AMV vs variational {mutual:.2e}, {elapsed:.2?}"
        ),
    )
}

fn perturbation_order() -> Outcome {
    let p = 4.0;
    let s = presets::worst_case(p).unwrap();
    let main = s.main_term_series();
    let params = s.params();
    let (l2, l3) = (lambda_k(params, 2).unwrap(), lambda_k(params, 3).unwrap());
    let predicted = 1.0 + l3 / (l2 * l2);
    let r0 = 0.5 * s.image_inradius(512);
    let radii: Vec<f64> = (0..8).map(|j| r0 * 0.7f64.powi(j)).collect();
    let gaps: Vec<f64> = radii
        .iter()
        .map(|&r| {
            (0..64)
                .map(|j| {
                    let z = Complex::from_polar(r, TAU * (j as f64 + 0.5) / 64.0);
                    (s.eval_u_at_z(z).unwrap() - main.eval_u_at_z(z).unwrap()).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let fit = fit_power_law(&radii, &gaps).unwrap();
    outcome(
        (fit.exponent - predicted).abs() < 0.05,
        format!(
            "fitted {:.4}, predicted {predicted:.4}, (1 + lambda_3) / lambda_2 = {:.4}",
            fit.exponent,
            (1.0 + l3) / l2
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("threshold reproduction", threshold_reproduction),
        ("Hölder range table", holder_table),
        ("exponent identities at p = 2", identities_at_p_two),
        ("epsilon_3 sign change at p = 2", epsilon_sign),
        ("main term symmetry", main_term_symmetry),
        ("positive verification", positive_verification),
        ("Aronsson counterexample", counterexample),
        ("hodograph self-consistency", hodograph_consistency),
        ("oracle agreement", oracle_agreement),
        ("perturbation order", perturbation_order),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
