//! Draw a synthetic sample from a known parameter set, fit it back, and compare.
//!
//! cargo run --release --example fit_roundtrip -- [n] [seed] [tail_trim]

use std::time::Instant;

use income_eq::data::{empirical_ccdf, Dataset};
use income_eq::fit::{fit, FitConfig};
use income_eq::{NormalizedModel, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(100_000), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;
    let tail_trim: usize = args.next().map_or(Ok(FitConfig::default().tail_trim), |s| s.parse())?;

    let truth = Params::new(38_000.0, 450_000.0, 135_000.0, 450_000.0, 3.153, 0.77)?;
    let incomes = NormalizedModel::new(truth)?.sample(n, seed)?;
    let ccdf = empirical_ccdf(&Dataset::from_values(incomes, "synthetic")?)?;

    let config = FitConfig {
        tie_t1_m1: true,
        seed,
        tail_trim,
        ..FitConfig::default()
    };
    let started = Instant::now();
    let result = fit(&ccdf, &config)?;
    let p = result.params;

    println!("{n} samples, fitted in {:.1?}", started.elapsed());
    println!("objective {:.3e}, converged {}, {} iterations", result.objective, result.converged, result.iterations);
    println!("{:>8} {:>14} {:>14} {:>9}", "param", "truth", "fitted", "rel.err");
    let rows = [
        ("T", truth.t_low, p.t_low),
        ("T1", truth.t_high, p.t_high),
        ("m0", truth.m0, p.m0),
        ("m1", truth.m1, p.m1),
        ("alpha", truth.alpha, p.alpha),
        ("alpha1", truth.alpha1, p.alpha1),
    ];
    for (name, t, f) in rows {
        println!("{name:>8} {t:>14.4} {f:>14.4} {:>8.2}%", 100.0 * (f / t - 1.0));
    }
    let grid = income_eq::fit::ObjectiveGrid::new(&ccdf, config.grid_points, config.tail_trim)?;
    let at_truth = grid.evaluate(&NormalizedModel::new(truth)?)?;
    println!("objective at the generating parameters: {at_truth:.3e}");
    Ok(())
}
