//! Simulate the income dynamics whose stationary law is the two-branch density and
//! compare the ensemble with it.
//!
//! cargo run --release --example langevin -- [agents] [dt]

use income_eq::langevin::{ks_distance, run_to_stationarity, SimConfig, StationarityRule};
use income_eq::{from_fp_coefficients, FpCoefficients, NormalizedModel, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let agents: usize = args.next().map_or(Ok(20_000), |s| s.parse())?;
    let dt: f64 = args.next().map_or(Ok(1e-3), |s| s.parse())?;

    let p = Params::new(38_000.0, 450_000.0, 135_000.0, 450_000.0, 3.153, 0.77)?;
    let coeffs = FpCoefficients::realizing(&p, 1.0)?;
    println!("{coeffs:?}");
    println!("mapped back: {:?}", from_fp_coefficients(&coeffs, p.m1)?);

    let config = SimConfig {
        coeffs,
        m1: p.m1,
        n_agents: agents,
        dt,
        n_steps: 0,
        seed: 11,
        record_stride: 1,
    };
    let rule = StationarityRule {
        ks_threshold: 0.01,
        ..StationarityRule::default()
    };
    let run = run_to_stationarity(&config, rule)?;
    for (t, ks) in &run.checks {
        println!("KS between t={t} and t={}: {ks:.4}", 2.0 * t);
    }
    let model = NormalizedModel::new(p)?;
    println!(
        "stationary: {} at t={}; KS to the model {:.4}",
        run.reached,
        run.snapshot.time,
        ks_distance(&run.snapshot.incomes, &model)?
    );
    Ok(())
}
