//! Quadrature checked against routes that share nothing with the arctan substitution:
//! brute-force midpoint sums and direct integration in income space.

use std::f64::consts::FRAC_PI_2;

use income_eq::quadrature::{branch_mass, integrate_adaptive, integrate_with, Branch, QuadOptions};
use income_eq::Params;
use proptest::prelude::*;

/// Midpoint rule for `int_0^{pi/2} cos(u)^(a-1) du` after `v = pi/2 - u`, `w = v^a`,
/// which turns the integrand into the bounded `(sin v / v)^(a-1) / a`.
fn midpoint_cos_power(a: f64, n: usize) -> f64 {
    let w_max = FRAC_PI_2.powf(a);
    let h = w_max / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let w = (i as f64 + 0.5) * h;
        let v = w.powf(1.0 / a);
        sum += (v.sin() / v).powf(a - 1.0);
    }
    sum * h / a
}

#[test]
fn endpoint_singularity_matches_midpoint_oracle() {
    let alpha1: f64 = 0.77;
    let oracle = midpoint_cos_power(alpha1, 10_000_000);
    let r = integrate_adaptive(|u: f64| u.cos().powf(alpha1 - 1.0), 0.0, FRAC_PI_2, 1e-10);
    assert!(r.converged, "{r:?}");
    let rel = (r.value - oracle).abs() / oracle;
    assert!(rel < 1e-8, "adaptive {} vs midpoint {oracle}: rel {rel:e}", r.value);
}

/// `int_a^b kernel dm` by adaptive quadrature directly in income space, split at decades.
fn direct_mass(m0: f64, beta: f64, alpha: f64, a: f64, b: f64) -> f64 {
    let kernel = |m: f64| {
        let x = m / m0;
        (-beta * x.atan() - (alpha + 1.0) * x.hypot(1.0).ln()).exp()
    };
    let mut cuts = vec![a];
    let mut edge = if a > 0.0 { a * 10.0 } else { m0 * 1e-6 };
    while edge < b {
        cuts.push(edge);
        edge *= 10.0;
    }
    cuts.push(b);
    cuts.windows(2)
        .map(|w| {
            let r = integrate_with(
                kernel,
                w[0],
                w[1],
                QuadOptions {
                    rel_tol: 1e-13,
                    abs_floor: 1e-300,
                    ..QuadOptions::default()
                },
            );
            r.value
        })
        .sum()
}

/// `int_L^inf kernel dm` from the large-`x` expansion of the kernel,
/// `exp(-beta pi/2) x^-(alpha+1) (1 + beta/x + (beta^2/2 - (alpha+1)/2)/x^2 + ...)`.
fn tail_series(m0: f64, beta: f64, alpha: f64, big_l: f64) -> f64 {
    let x = big_l / m0;
    let c2 = 0.5 * beta * beta - 0.5 * (alpha + 1.0);
    m0 * (-beta * FRAC_PI_2).exp()
        * (x.powf(-alpha) / alpha
            + beta * x.powf(-alpha - 1.0) / (alpha + 1.0)
            + c2 * x.powf(-alpha - 2.0) / (alpha + 2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn substitution_agrees_with_income_space_integration(
        lm0 in 3.0f64..7.0, lbeta in -2.0f64..1.5, alpha in 0.3f64..4.0, high in any::<bool>(),
    ) {
        let m0 = 10f64.powf(lm0);
        let temp = m0 / 10f64.powf(lbeta);
        let params = if high {
            Params::new(temp * 2.0, temp, m0, 2.0 * m0, 2.0, alpha).unwrap()
        } else {
            Params::new(temp, temp * 2.0, m0, 2.0 * m0, alpha, 2.0).unwrap()
        };
        let branch = if high { Branch::High } else { Branch::Low };
        let beta = m0 / temp;
        let big_l = m0 * 1e7;
        let oracle = direct_mass(m0, beta, alpha, 0.0, big_l) + tail_series(m0, beta, alpha, big_l);
        let got = branch_mass(&params, branch, 0.0, f64::INFINITY).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-8 * oracle, "{} vs {}", got, oracle);

        // finite sub-interval, no tail involved
        let (a, b) = (0.3 * m0, 40.0 * m0);
        let oracle = direct_mass(m0, beta, alpha, a, b);
        let got = branch_mass(&params, branch, a, b).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-8 * oracle, "{} vs {}", got, oracle);
    }
}

struct Case {
    f: Box<dyn Fn(f64) -> f64>,
    a: f64,
    b: f64,
    exact: f64,
}

fn corpus() -> Vec<Case> {
    let mut cases: Vec<Case> = Vec::new();
    for k in 0..8 {
        let p = k as f64 * 1.7;
        cases.push(Case {
            f: Box::new(move |x: f64| x.powf(p)),
            a: 0.0,
            b: 2.0,
            exact: 2f64.powf(p + 1.0) / (p + 1.0),
        });
    }
    for k in 1..8 {
        let lam = k as f64;
        cases.push(Case {
            f: Box::new(move |x: f64| (-lam * x).exp()),
            a: 0.0,
            b: 10.0,
            exact: (1.0 - (-10.0 * lam).exp()) / lam,
        });
        cases.push(Case {
            f: Box::new(move |x: f64| (lam * x).sin()),
            a: 0.0,
            b: 3.0,
            exact: (1.0 - (3.0 * lam).cos()) / lam,
        });
        cases.push(Case {
            f: Box::new(move |x: f64| 1.0 / (1.0 + (lam * x).powi(2))),
            a: -5.0,
            b: 5.0,
            exact: 2.0 * (5.0 * lam).atan() / lam,
        });
    }
    for s in [-0.9, -0.7, -0.5, -0.3, -0.1, 0.5] {
        cases.push(Case {
            f: Box::new(move |x: f64| x.powf(s)),
            a: 0.0,
            b: 1.0,
            exact: 1.0 / (s + 1.0),
        });
    }
    cases.push(Case {
        f: Box::new(|x: f64| x.ln()),
        a: 0.0,
        b: 1.0,
        exact: -1.0,
    });
    cases.push(Case {
        f: Box::new(|x: f64| (-0.5 * x * x).exp()),
        a: -8.0,
        b: 8.0,
        exact: (2.0 * std::f64::consts::PI).sqrt() * 0.999_999_999_999_998_8,
    });
    cases
}

#[test]
fn error_estimates_are_honest() {
    let tols = [1e-4, 1e-6, 1e-8, 1e-10, 1e-12];
    let mut total = 0;
    let mut honest = 0;
    let mut worst = 0.0f64;
    for case in corpus() {
        for tol in tols {
            let r = integrate_adaptive(&case.f, case.a, case.b, tol);
            let true_err = (r.value - case.exact).abs();
            total += 1;
            let allowed = 10.0 * r.abs_error_estimate + 4.0 * f64::EPSILON * case.exact.abs();
            if true_err <= allowed {
                honest += 1;
            } else {
                worst = worst.max(true_err / r.abs_error_estimate);
            }
        }
    }
    let share = honest as f64 / total as f64;
    println!("error estimates honest in {honest}/{total} cases (worst ratio {worst:e})");
    assert!(share >= 0.99, "only {honest}/{total} honest");
}
