//! Yearly parameter table with the crisis indicator and cross-year means.
//!
//! cargo run --release --example crisis_report

use std::collections::BTreeSet;

use income_eq::report::{aggregate_params, reference_rows, render_table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = reference_rows();
    print!("{}", render_table(&rows));
    for r in rows.iter().filter(|r| r.crisis) {
        println!("{}: alpha1 = {} above threshold, high-income class thinned out", r.label, r.params.alpha1);
    }
    let all = aggregate_params(&rows, &BTreeSet::new())?;
    let calm: BTreeSet<String> = rows.iter().filter(|r| r.crisis).map(|r| r.label.clone()).collect();
    let without = aggregate_params(&rows, &calm)?;
    println!("mean over all years:        {:?}", all.mean);
    println!("mean without flagged years: {:?}", without.mean);
    Ok(())
}
