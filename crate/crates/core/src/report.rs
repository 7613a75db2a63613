//! Parameter tables, the high-income-class crisis indicator and cross-year aggregates.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::ParamErrors;
use crate::params::Params;

/// Default crisis threshold on `alpha1`.
pub const DEFAULT_CRISIS_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub params: Params,
    pub errors: Option<ParamErrors>,
    pub crisis: bool,
}

impl ReportRow {
    pub fn new(label: impl Into<String>, params: Params, errors: Option<ParamErrors>, threshold: f64) -> Self {
        Self {
            label: label.into(),
            crisis: crisis_indicator(&params, threshold).flag,
            params,
            errors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrisisIndicator {
    pub flag: bool,
    /// The Pareto exponent `alpha1` of the high-income branch.
    pub score: f64,
}

/// A high-income class that has thinned out shows up as a steep top tail: `alpha1 > threshold`.
pub fn crisis_indicator(params: &Params, threshold: f64) -> CrisisIndicator {
    CrisisIndicator {
        flag: params.alpha1 > threshold,
        score: params.alpha1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub labels: Vec<String>,
    /// Arithmetic mean of every parameter over the included rows.
    pub mean: Params,
}

/// Means over the rows whose label is not in `exclude`.
pub fn aggregate_params(rows: &[ReportRow], exclude: &BTreeSet<String>) -> Result<AggregateSummary> {
    let kept: Vec<&ReportRow> = rows.iter().filter(|r| !exclude.contains(&r.label)).collect();
    if kept.is_empty() {
        return Err(Error::Domain("no rows left to aggregate".into()));
    }
    let mut sum = [0.0; 6];
    for r in &kept {
        for (s, v) in sum.iter_mut().zip(r.params.to_array()) {
            *s += v;
        }
    }
    let n = kept.len() as f64;
    Ok(AggregateSummary {
        labels: kept.iter().map(|r| r.label.clone()).collect(),
        mean: Params::from_array(sum.map(|s| s / n)),
    })
}

/// The six yearly EU household-income fits (2005-2010) with their reported errors.
pub fn reference_rows() -> Vec<ReportRow> {
    const ROWS: [(&str, [f64; 6], [f64; 6]); 6] = [
        // label, [T, T1, m0, m1, alpha, alpha1], errors in the same order
        ("2005", [36e3, 430e3, 155e3, 430e3, 2.907, 0.795], [3e3, 50e3, 20e3, 50e3, 0.003, 0.009]),
        ("2006", [37e3, 445e3, 145e3, 445e3, 2.892, 0.86], [3e3, 50e3, 20e3, 50e3, 0.004, 0.01]),
        ("2007", [37e3, 480e3, 160e3, 480e3, 2.735, 0.79], [3e3, 50e3, 20e3, 50e3, 0.004, 0.01]),
        ("2008", [38e3, 450e3, 120e3, 450e3, 2.965, 0.890], [3e3, 50e3, 20e3, 50e3, 0.001, 0.007]),
        ("2009", [37e3, 290e3, 145e3, 290e3, 2.974, 2.608], [3e3, 50e3, 20e3, 50e3, 0.001, 0.006]),
        ("2010", [38e3, 450e3, 135e3, 450e3, 3.153, 0.77], [3e3, 50e3, 20e3, 50e3, 0.002, 0.01]),
    ];
    ROWS.iter()
        .map(|(label, p, e)| {
            ReportRow::new(
                *label,
                Params::from_array(*p),
                Some(ParamErrors::from_array(*e)),
                DEFAULT_CRISIS_THRESHOLD,
            )
        })
        .collect()
}

/// Nearest multiple of 1000.
pub fn round_thousand(v: f64) -> f64 {
    (v / 1000.0).round() * 1000.0
}

/// Fixed-width text table; monetary columns rounded to the nearest 1000 EUR.
pub fn render_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>7} {:>9} {:>9} {:>7}  crisis",
        "label", "T", "m0", "alpha", "T1", "m1", "alpha1"
    );
    for r in rows {
        let p = &r.params;
        let _ = writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>7.3} {:>9} {:>9} {:>7.3}  {}",
            r.label,
            round_thousand(p.t_low),
            round_thousand(p.m0),
            p.alpha,
            round_thousand(p.t_high),
            round_thousand(p.m1),
            p.alpha1,
            if r.crisis { "yes" } else { "no" }
        );
        if let Some(e) = &r.errors {
            let _ = writeln!(
                out,
                "{:<10} {:>9} {:>9} {:>7.3} {:>9} {:>9} {:>7.3}",
                "  +-",
                round_thousand(e.t_low),
                round_thousand(e.m0),
                e.alpha,
                round_thousand(e.t_high),
                round_thousand(e.m1),
                e.alpha1
            );
        }
    }
    out
}
