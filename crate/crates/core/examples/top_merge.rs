//! Merge a rich list into a survey sample and fit both versions.
//!
//! cargo run --release --example top_merge

use income_eq::data::{billionaire_effective_income, empirical_ccdf, load_billionaires, merge_datasets, Dataset};
use income_eq::fit::{fit, FitConfig};
use income_eq::{NormalizedModel, Params};

const RICH_LIST: &str = "wealth_usd,name
74000000000,first
52000000000,second
36000000000,third
21000000000,fourth
14000000000,fifth
9500000000,sixth
6100000000,seventh
4200000000,eighth
3300000000,ninth
2500000000,tenth
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = Params::new(38_000.0, 450_000.0, 135_000.0, 450_000.0, 3.153, 0.77)?;
    let survey = Dataset::from_values(NormalizedModel::new(truth)?.sample(20_000, 3)?, "survey")?;

    let (records, rejected) = load_billionaires(RICH_LIST.as_bytes())?;
    let top = billionaire_effective_income(&records, 0.75, 0.05)?;
    println!("{} rich-list rows ({} rejected), top effective income {:.3e} EUR", records.len(), rejected.len(), top[0]);
    let merged = merge_datasets(&survey, &top, 1.0)?;

    let config = FitConfig {
        tie_t1_m1: true,
        seed: 3,
        ..FitConfig::default()
    };
    for ds in [&survey, &merged] {
        let r = fit(&empirical_ccdf(ds)?, &config)?;
        let p = r.params;
        println!(
            "{:<40} T {:>7.0} m0 {:>7.0} alpha {:.3} m1 {:>7.0} alpha1 {:.3}",
            ds.label, p.t_low, p.m0, p.alpha, p.m1, p.alpha1
        );
    }
    Ok(())
}
