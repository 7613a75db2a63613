use income_eq::data::{empirical_ccdf, Dataset, EmpiricalCcdf};
use income_eq::fit::{
    bootstrap_errors, bootstrap_errors_with, fit, objective, FitConfig, ObjectiveGrid,
};
use income_eq::{Error, NormalizedModel, Params};
use proptest::prelude::*;

fn row_2010() -> Params {
    Params::new(38_000.0, 450_000.0, 135_000.0, 450_000.0, 3.153, 0.77).unwrap()
}

fn row_2009() -> Params {
    Params::new(37_000.0, 290_000.0, 145_000.0, 290_000.0, 2.974, 2.608).unwrap()
}

fn dataset(p: Params, n: usize, seed: u64) -> Dataset {
    let xs = NormalizedModel::new(p).unwrap().sample(n, seed).unwrap();
    Dataset::from_values(xs, "synthetic").unwrap()
}

fn ccdf(p: Params, n: usize, seed: u64) -> EmpiricalCcdf {
    empirical_ccdf(&dataset(p, n, seed)).unwrap()
}

fn tied(seed: u64) -> FitConfig {
    FitConfig {
        tie_t1_m1: true,
        seed,
        ..FitConfig::default()
    }
}

#[test]
fn generator_objective_is_small_at_large_n() {
    let v = objective(&row_2010(), &ccdf(row_2010(), 100_000, 21), 200).unwrap();
    assert!(v < 1e-3, "{v}");
}

#[test]
fn seeded_fit_is_bit_reproducible() {
    let c = ccdf(row_2010(), 20_000, 5);
    let a = fit(&c, &tied(3)).unwrap();
    let b = fit(&c, &tied(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn tied_fit_returns_equal_t1_and_m1_within_bounds() {
    let r = fit(&ccdf(row_2010(), 20_000, 6), &tied(1)).unwrap();
    assert_eq!(r.params.t_high, r.params.m1);
    assert!(r.config.bounds.contains(&r.params));
    assert!(r.objective >= 0.0);
    assert_eq!(r.restarts_used, r.config.restarts);
}

#[test]
fn collapsed_class_year_keeps_a_steep_tail() {
    let r = fit(&ccdf(row_2009(), 100_000, 9), &tied(9)).unwrap();
    assert!(r.converged);
    assert!(r.params.alpha1 > 2.0, "{:?}", r.params);
}

#[test]
fn degenerate_generator_is_flagged_not_rejected() {
    // alpha = alpha1 and T = T1: a single law, m1 carries no information
    let p = Params::new(38_000.0, 38_000.0, 135_000.0, 450_000.0, 3.0, 3.0).unwrap();
    let c = ccdf(p, 50_000, 13);
    let config = FitConfig {
        seed: 13,
        ..FitConfig::default()
    };
    let r = fit(&c, &config).unwrap();
    let at_generator = objective(&p, &c, config.grid_points).unwrap();
    assert!(r.objective <= at_generator, "{} > {at_generator}", r.objective);
    for m1 in [200_000.0, 1e6, 5e6] {
        let other = objective(&Params { m1, ..p }, &c, config.grid_points).unwrap();
        assert!((other - at_generator).abs() < 0.05 * at_generator + 1e-6, "m1={m1}: {other}");
    }
    assert!(r.diagnostics.degenerate_ridge, "{:?} {:?}", r.params, r.diagnostics);
}

#[test]
fn two_branch_fit_is_not_flagged_as_ridge() {
    let r = fit(&ccdf(row_2010(), 100_000, 8), &tied(8)).unwrap();
    let d = &r.diagnostics;
    assert!(!d.degenerate_ridge, "{d:?}");
    assert!(d.single_law_objective > 10.0 * r.objective, "{d:?}");
}

#[test]
fn bootstrap_of_identical_resamples_has_zero_spread() {
    let ds = dataset(row_2010(), 5_000, 2);
    let config = FitConfig {
        bootstrap_resamples: 20,
        ..tied(2)
    };
    let c = empirical_ccdf(&ds).unwrap();
    let center = fit(&c, &config).unwrap().params;
    let n = ds.len();
    let errors = bootstrap_errors_with(&ds, &config, &center, |_, _| (0..n).collect()).unwrap();
    assert_eq!(errors.to_array(), [0.0; 6]);
}

#[test]
fn bootstrap_is_seeded_and_non_negative() {
    let config = FitConfig {
        bootstrap_resamples: 20,
        ..tied(4)
    };
    let ds = dataset(row_2010(), 20_000, 17);
    let center = fit(&empirical_ccdf(&ds).unwrap(), &config).unwrap().params;
    let e = bootstrap_errors(&ds, &config, &center).unwrap();
    assert!(e.to_array().iter().all(|v| *v > 0.0), "{e:?}");
    assert_eq!(e.t_high, e.m1);
    assert_eq!(e, bootstrap_errors(&ds, &config, &center).unwrap());
}

#[test]
fn noise_floor_matches_the_generator_objective() {
    // the generator's objective is pure sampling noise
    let c = ccdf(row_2010(), 100_000, 31);
    let grid = ObjectiveGrid::new(&c, 200, 20).unwrap();
    let v = grid.evaluate(&NormalizedModel::new(row_2010()).unwrap()).unwrap();
    let ratio = v / grid.noise_floor();
    assert!(ratio > 0.1 && ratio < 10.0, "{v} vs floor {}", grid.noise_floor());
}

#[test]
fn bootstrap_rejects_small_or_unreliable_runs() {
    let ds = dataset(row_2010(), 2_000, 3);
    let center = row_2010();
    let few = FitConfig {
        bootstrap_resamples: 19,
        ..tied(1)
    };
    assert!(matches!(bootstrap_errors(&ds, &few, &center), Err(Error::Config(_))));
    let starved = FitConfig {
        bootstrap_resamples: 20,
        max_evaluations: 10,
        opt_tol: 1e-12,
        ..tied(1)
    };
    match bootstrap_errors(&ds, &starved, &center) {
        Err(Error::UnreliableErrors { failed, total }) => {
            assert_eq!(total, 20);
            assert!(failed > 10);
        }
        other => panic!("expected unreliable errors, got {other:?}"),
    }
}

#[test]
fn too_narrow_data_is_insufficient() {
    let xs: Vec<f64> = (0..500).map(|i| 1000.0 + i as f64).collect();
    let c = empirical_ccdf(&Dataset::from_values(xs, "narrow").unwrap()).unwrap();
    assert!(matches!(fit(&c, &FitConfig::default()), Err(Error::InsufficientData(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objective_is_scale_free(lambda in 0.01f64..100.0, seed in 0u64..1000) {
        let p = row_2010();
        let xs = NormalizedModel::new(p).unwrap().sample(3_000, seed).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| x * lambda).collect();
        let a = objective(&p, &empirical_ccdf(&Dataset::from_values(xs, "a").unwrap()).unwrap(), 200).unwrap();
        let b = objective(
            &p.scaled(lambda),
            &empirical_ccdf(&Dataset::from_values(scaled, "b").unwrap()).unwrap(),
            200,
        )
        .unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-8 * a, "{} vs {}", a, b);
    }

    #[test]
    fn objective_is_zero_on_its_own_grid(lt in 3.5f64..5.0, la1 in 0.5f64..3.0) {
        let p = Params::new(10f64.powf(lt), 4e5, 1.3e5, 4e5, 3.0, la1).unwrap();
        let model = NormalizedModel::new(p).unwrap();
        let ms = income_eq::model::log_grid(100.0, 1e8, 150);
        let pts = ms
            .iter()
            .zip(model.ccdf_grid(&ms).unwrap())
            .map(|(&m, p)| income_eq::data::CcdfPoint { m, p })
            .collect();
        let c = EmpiricalCcdf::from_points(pts).unwrap();
        let v = ObjectiveGrid::new(&c, 150, 1).unwrap().evaluate(&model).unwrap();
        prop_assert!(v < 1e-24, "{}", v);
    }
}
