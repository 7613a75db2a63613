//! Draw a seeded sample and compare its empirical CCDF with the model.
//!
//! cargo run --release --example sampling -- [n] [seed]

use income_eq::data::{empirical_ccdf, Dataset};
use income_eq::langevin::ks_distance;
use income_eq::{NormalizedModel, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(100_000), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;

    let p = Params::new(37_000.0, 290_000.0, 145_000.0, 290_000.0, 2.974, 2.608)?;
    let model = NormalizedModel::new(p)?;
    let xs = model.sample(n, seed)?;
    println!("{n} draws, KS distance to the model {:.4}", ks_distance(&xs, &model)?);

    let ds = Dataset::from_values(xs, "sample")?;
    println!("Gini {:.3}", ds.gini());
    let ccdf = empirical_ccdf(&ds)?;
    let pts = ccdf.points();
    println!("{:>12} {:>12} {:>12}", "m", "empirical", "model");
    for i in [pts.len() / 2, pts.len() * 9 / 10, pts.len() * 99 / 100, pts.len() - 10] {
        let q = pts[i];
        println!("{:>12.0} {:>12.3e} {:>12.3e}", q.m, q.p, model.ccdf(q.m)?);
    }
    Ok(())
}
