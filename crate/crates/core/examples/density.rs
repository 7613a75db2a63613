//! Normalize a parameter set and tabulate the density and CCDF across both branches.
//!
//! cargo run --release --example density

use income_eq::model::log_grid;
use income_eq::{NormalizedModel, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Params::new(38_000.0, 450_000.0, 135_000.0, 450_000.0, 3.153, 0.77)?;
    let model = NormalizedModel::new(p)?;
    let d = model.diagnostics();
    println!("{}", serde_json::to_string_pretty(&d)?);
    println!("continuity defect at m1: {:.2e}", model.continuity_defect());

    println!("\n{:>14} {:>14} {:>12}", "m", "pdf", "ccdf");
    for m in log_grid(1e3, 1e8, 11) {
        println!("{m:>14.0} {:>14.4e} {:>12.4e}", model.pdf(m)?, model.ccdf(m)?);
    }

    for share in [0.5, 0.1, 0.01, 0.001] {
        println!("top {:>5.1}% starts at {:.0}", 100.0 * share, model.quantile(share)?);
    }
    let below = model.ccdf_slope(2.0 * p.m0, p.m1, 40)?;
    let above = model.tail_slope(100.0 * p.m1, 1e4 * p.m1, 40)?;
    println!("log-log CCDF slope below m1: {below:.3} (-alpha = {})", -p.alpha);
    println!("log-log CCDF slope far above m1: {above:.3} (-alpha1 = {})", -p.alpha1);
    Ok(())
}
