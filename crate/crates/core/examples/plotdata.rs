//! Fit a sample and write the empirical and fitted CCDF for a log-log plot, using the
//! command-line front end in-process.
//!
//! cargo run --release --example plotdata -- OUT_DIR

use std::path::PathBuf;

use income_eq::{NormalizedModel, Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    let incomes = dir.join("incomes.csv");
    let fit_json = dir.join("fit.json");
    let plot_csv = dir.join("plot.csv");

    let p = Params::new(37_000.0, 290_000.0, 145_000.0, 290_000.0, 2.974, 2.608)?;
    let mut w = csv::Writer::from_path(&incomes)?;
    w.write_record(["income"])?;
    for x in NormalizedModel::new(p)?.sample(20_000, 4)? {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;

    let path = |p: &PathBuf| p.to_string_lossy().into_owned();
    let steps: [Vec<String>; 2] = [
        ["fit", "--incomes", &path(&incomes), "--tie-t1-m1", "--bootstrap", "0", "--out", &path(&fit_json)]
            .map(String::from)
            .to_vec(),
        ["plotdata", "--params", &path(&fit_json), "--incomes", &path(&incomes), "--out", &path(&plot_csv)]
            .map(String::from)
            .to_vec(),
    ];
    for args in steps {
        let code = income_eq::cli::run(
            std::iter::once("income-eq".to_string()).chain(args),
            &mut std::io::stdout(),
            &mut std::io::stderr(),
        );
        if code != 0 {
            return Err(format!("exit code {code}").into());
        }
    }
    println!("wrote {}", plot_csv.display());
    Ok(())
}
