//! Income microdata: CSV ingestion, the billionaire top-income extension and
//! Weibull plotting-position CCDFs.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted income sample, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    weights: Vec<f64>,
    pub label: String,
}

impl Dataset {
    /// Sorts `values` (carrying `weights` along) and validates both.
    pub fn new(values: Vec<f64>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("income must be finite and >= 0, got {v}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Domain(format!("weight must be finite and >= 0, got {w}")));
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::Domain("total weight must be positive".into()));
        }
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(weights).collect();
        // stable, so equal incomes keep input order
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (values, weights) = pairs.into_iter().unzip();
        Ok(Self {
            values,
            weights,
            label: label.into(),
        })
    }

    /// Unit-weight dataset.
    pub fn from_values(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        Self::new(values, weights, label)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Unit-weight dataset made of the records at `indices` (repeats allowed).
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let values = indices.iter().map(|&i| self.values[i]).collect();
        Self::from_values(values, self.label.clone())
    }

    /// Weighted Gini coefficient.
    pub fn gini(&self) -> f64 {
        // G = 1 - sum_i w_i (S_{i-1} + S_i) / (W S_n), S the cumulative weighted income.
        let total_w = self.total_weight();
        let total_income: f64 = self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        if total_income == 0.0 {
            return 0.0;
        }
        let mut cum = 0.0;
        let mut area = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            let next = cum + v * w;
            area += w * (cum + next);
            cum = next;
        }
        1.0 - area / (total_w * total_income)
    }
}

/// Column layout of an income CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncomeFormat {
    pub income_column: String,
    /// Used when present in the header; all weights default to 1 otherwise.
    pub weight_column: Option<String>,
}

impl Default for IncomeFormat {
    fn default() -> Self {
        Self {
            income_column: "income".into(),
            weight_column: Some("weight".into()),
        }
    }
}

/// A CSV row that was skipped, numbered by file line (header = line 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedIncomes {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn parse_field(record: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = record.get(idx).ok_or_else(|| format!("missing {name} field"))?;
    raw.parse::<f64>().map_err(|_| format!("{name} {raw:?} is not a number"))
}

/// Parses an income CSV. Rows with a negative, non-finite or unparsable income
/// (or weight) are skipped and reported in [`LoadedIncomes::rejections`].
pub fn load_incomes<R: Read>(source: R, format: &IncomeFormat, label: &str) -> Result<LoadedIncomes> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let income_idx = column_index(&headers, &format.income_column).ok_or_else(|| {
        Error::Format(format!("no {:?} column in header", format.income_column))
    })?;
    let weight_idx = format
        .weight_column
        .as_deref()
        .and_then(|name| column_index(&headers, name));

    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut rejections = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        let parsed = parse_field(&record, income_idx, &format.income_column).and_then(|v| {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("income {v} is negative or not finite"));
            }
            let w = match weight_idx {
                Some(i) => parse_field(&record, i, "weight")?,
                None => 1.0,
            };
            if !w.is_finite() || w < 0.0 {
                return Err(format!("weight {w} is negative or not finite"));
            }
            Ok((v, w))
        });
        match parsed {
            Ok((v, w)) => {
                values.push(v);
                weights.push(w);
            }
            Err(reason) => rejections.push(Rejection { row, reason }),
        }
    }
    if values.is_empty() || !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::EmptyDataset);
    }
    Ok(LoadedIncomes {
        dataset: Dataset::new(values, weights, label)?,
        rejections,
    })
}

pub fn load_incomes_path(path: &Path, format: &IncomeFormat) -> Result<LoadedIncomes> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("incomes");
    load_incomes(file, format, label)
}

/// One entry of a rich list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillionaireRecord {
    pub wealth_usd: f64,
    /// FNV-1a hash of the name, or of the row number when the name is missing.
    pub name_hash: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Parses a CSV with a `wealth_usd` column and an optional `name` column.
pub fn load_billionaires<R: Read>(source: R) -> Result<(Vec<BillionaireRecord>, Vec<Rejection>)> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let wealth_idx = column_index(&headers, "wealth_usd")
        .ok_or_else(|| Error::Format("no \"wealth_usd\" column in header".into()))?;
    let name_idx = column_index(&headers, "name");
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        match parse_field(&record, wealth_idx, "wealth_usd") {
            Ok(w) if w.is_finite() && w > 0.0 => {
                let key = match name_idx.and_then(|i| record.get(i)) {
                    Some(name) if !name.is_empty() => fnv1a(name.as_bytes()),
                    _ => fnv1a(row.to_string().as_bytes()),
                };
                records.push(BillionaireRecord {
                    wealth_usd: w,
                    name_hash: key,
                });
            }
            Ok(w) => rejections.push(Rejection {
                row,
                reason: format!("wealth_usd {w} must be positive"),
            }),
            Err(reason) => rejections.push(Rejection { row, reason }),
        }
    }
    Ok((records, rejections))
}

pub const DEFAULT_RETURN_RATE: f64 = 0.05;

/// Annual EUR income imputed from wealth: `wealth_usd * usd_eur_rate * return_rate`.
/// Non-positive results are dropped.
pub fn billionaire_effective_income(
    records: &[BillionaireRecord],
    usd_eur_rate: f64,
    return_rate: f64,
) -> Result<Vec<f64>> {
    if !(usd_eur_rate > 0.0 && usd_eur_rate.is_finite()) {
        return Err(Error::Config(format!("usd_eur_rate must be > 0, got {usd_eur_rate}")));
    }
    if !(return_rate > 0.0 && return_rate.is_finite()) {
        return Err(Error::Config(format!("return_rate must be > 0, got {return_rate}")));
    }
    Ok(records
        .iter()
        .map(|r| r.wealth_usd * usd_eur_rate * return_rate)
        .filter(|&m| m > 0.0)
        .collect())
}

/// Appends `top_incomes`, each carrying weight `top_weight`, to the survey sample.
pub fn merge_datasets(survey: &Dataset, top_incomes: &[f64], top_weight: f64) -> Result<Dataset> {
    if !(top_weight > 0.0 && top_weight.is_finite()) {
        return Err(Error::Config(format!("top_weight must be > 0, got {top_weight}")));
    }
    if top_incomes.is_empty() {
        return Ok(survey.clone());
    }
    let mut values = survey.values.clone();
    let mut weights = survey.weights.clone();
    values.extend_from_slice(top_incomes);
    weights.extend(std::iter::repeat_n(top_weight, top_incomes.len()));
    let label = format!(
        "{} + {} top incomes (weight {top_weight})",
        survey.label,
        top_incomes.len()
    );
    Dataset::new(values, weights, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub m: f64,
    pub p: f64,
}

/// Empirical CCDF: `m` strictly increasing, `p` strictly decreasing, `0 < p < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCcdf {
    points: Vec<CcdfPoint>,
}

impl EmpiricalCcdf {
    /// Checks the monotonicity and range invariants.
    pub fn from_points(points: Vec<CcdfPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if points.iter().any(|q| !(q.p > 0.0 && q.p < 1.0) || !(q.m >= 0.0)) {
            return Err(Error::Domain("ccdf points need m >= 0 and 0 < p < 1".into()));
        }
        if points.windows(2).any(|w| !(w[1].m > w[0].m && w[1].p < w[0].p)) {
            return Err(Error::Domain("ccdf points must be strictly monotone".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[CcdfPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest and largest income with a point.
    pub fn range(&self) -> (f64, f64) {
        (self.points[0].m, self.points[self.points.len() - 1].m)
    }
}

/// Weibull plotting positions `p_i = 1 - i/(n+1)` for ascending rank `i`.
///
/// With weights, `p_i = 1 - W_i / (W + w_mean)` where `W_i` is the cumulative weight through
/// rank `i`; equal weights give exactly the unweighted positions. Zero-weight records carry
/// no probability and are skipped. Tied incomes collapse onto the point of the highest rank.
pub fn empirical_ccdf(ds: &Dataset) -> Result<EmpiricalCcdf> {
    let records: Vec<(f64, f64)> = ds
        .values
        .iter()
        .zip(&ds.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = records.len();
    let equal = records.iter().all(|(_, w)| *w == records[0].1);

    let mut positions = Vec::with_capacity(n);
    if equal {
        let denom = (n + 1) as f64;
        for (i, (v, _)) in records.iter().enumerate() {
            positions.push((*v, 1.0 - (i + 1) as f64 / denom));
        }
    } else {
        let total: f64 = records.iter().map(|(_, w)| w).sum();
        let denom = total + total / n as f64;
        let mut cum = 0.0;
        for (v, w) in &records {
            cum += w;
            positions.push((*v, 1.0 - cum / denom));
        }
    }

    let mut points: Vec<CcdfPoint> = Vec::with_capacity(n);
    for (m, p) in positions {
        match points.last_mut() {
            Some(last) if last.m == m => last.p = p,
            _ => points.push(CcdfPoint { m, p }),
        }
    }
    Ok(EmpiricalCcdf { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<LoadedIncomes> {
        load_incomes(text.as_bytes(), &IncomeFormat::default(), "t")
    }

    fn ps(c: &EmpiricalCcdf) -> Vec<f64> {
        c.points().iter().map(|q| q.p).collect()
    }

    #[test]
    fn loads_and_sorts_incomes() {
        let l = load("income\n10\n30\n20\n").unwrap();
        assert_eq!(l.dataset.values(), &[10.0, 20.0, 30.0]);
        assert_eq!(l.dataset.weights(), &[1.0, 1.0, 1.0]);
        assert!(l.rejections.is_empty());
    }

    #[test]
    fn reads_weight_column() {
        let l = load("income,weight\n10,2\n").unwrap();
        assert_eq!(l.dataset.weights(), &[2.0]);
    }

    #[test]
    fn rejects_negative_income_with_row_number() {
        let l = load("income\n-5\n10\n").unwrap();
        assert_eq!(l.dataset.values(), &[10.0]);
        assert_eq!(l.rejections.len(), 1);
        assert_eq!(l.rejections[0].row, 2);
        let l = load("income\nabc\nNaN\n4\n").unwrap();
        let rows: Vec<u64> = l.rejections.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![2, 3]);
    }

    #[test]
    fn missing_column_and_empty_data_are_errors() {
        assert!(matches!(load("wage\n10\n"), Err(Error::Format(_))));
        assert!(matches!(load("income\n"), Err(Error::EmptyDataset)));
        assert!(matches!(load("income\n-1\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn effective_income_is_linear_in_wealth() {
        let recs = [BillionaireRecord {
            wealth_usd: 1e9,
            name_hash: 1,
        }];
        let m = billionaire_effective_income(&recs, 0.9, 0.05).unwrap();
        assert!((m[0] - 4.5e7).abs() < 1e-6);
        assert!(billionaire_effective_income(&[], 0.9, 0.05).unwrap().is_empty());
        assert!(matches!(
            billionaire_effective_income(&recs, 0.9, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            billionaire_effective_income(&recs, -1.0, 0.05),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn billionaire_csv_hashes_names() {
        let (recs, rej) = load_billionaires("name,wealth_usd\nA,2e9\nB,-3\n,5e9\n".as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(rej[0].row, 3);
        assert_eq!(recs[0].name_hash, fnv1a(b"A"));
        assert!(matches!(
            load_billionaires("name\nA\n".as_bytes()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn merge_appends_and_resorts() {
        let survey = Dataset::from_values(vec![20.0, 10.0], "s").unwrap();
        let merged = merge_datasets(&survey, &[100.0], 1.0).unwrap();
        assert_eq!(merged.values(), &[10.0, 20.0, 100.0]);
        assert!(merged.label.contains("top"));
        assert_eq!(merge_datasets(&survey, &[], 3.0).unwrap(), survey);
        assert_eq!(ps(&empirical_ccdf(&merged).unwrap()), vec![0.75, 0.5, 0.25]);
        assert!(merge_datasets(&survey, &[1.0], 0.0).is_err());
    }

    #[test]
    fn weibull_positions() {
        let ds = Dataset::from_values(vec![10.0, 20.0, 30.0], "x").unwrap();
        let c = empirical_ccdf(&ds).unwrap();
        let pts: Vec<(f64, f64)> = c.points().iter().map(|q| (q.m, q.p)).collect();
        assert_eq!(pts, vec![(10.0, 0.75), (20.0, 0.5), (30.0, 0.25)]);

        let single = Dataset::from_values(vec![7.0], "x").unwrap();
        assert_eq!(ps(&empirical_ccdf(&single).unwrap()), vec![0.5]);
    }

    #[test]
    fn equal_weights_reduce_to_unweighted() {
        let values = vec![3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let unit = empirical_ccdf(&Dataset::from_values(values.clone(), "u").unwrap()).unwrap();
        for c in [0.1, 0.7, 3.0, 1e6] {
            let w = Dataset::new(values.clone(), vec![c; values.len()], "w").unwrap();
            assert_eq!(empirical_ccdf(&w).unwrap(), unit);
        }
    }

    #[test]
    fn ties_collapse_to_smallest_position() {
        let ds = Dataset::from_values(vec![5.0, 5.0, 5.0, 8.0], "x").unwrap();
        let c = empirical_ccdf(&ds).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[0].p, 1.0 - 3.0 / 5.0);
    }

    #[test]
    fn zero_weight_records_are_skipped() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0], "x").unwrap();
        let c = empirical_ccdf(&ds).unwrap();
        assert_eq!(c.points()[0].m, 2.0);
        assert!(c.points().iter().all(|q| q.p > 0.0 && q.p < 1.0));
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![1.0], vec![1.0, 2.0], "x").is_err());
        assert!(Dataset::new(vec![-1.0], vec![1.0], "x").is_err());
        assert!(Dataset::new(vec![1.0], vec![0.0], "x").is_err());
        assert!(matches!(Dataset::from_values(vec![], "x"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn gini_of_equal_and_concentrated_samples() {
        let equal = Dataset::from_values(vec![5.0; 10], "e").unwrap();
        assert!(equal.gini().abs() < 1e-12);
        let mut v = vec![0.0; 99];
        v.push(1.0);
        let conc = Dataset::from_values(v, "c").unwrap();
        assert!((conc.gini() - 0.99).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn positions_stay_inside_unit_interval_and_monotone(
                values in prop::collection::vec(0.0f64..1e6, 1..200),
                weights in prop::collection::vec(0.01f64..10.0, 200),
            ) {
                let w = weights[..values.len()].to_vec();
                let c = empirical_ccdf(&Dataset::new(values, w, "p").unwrap()).unwrap();
                prop_assert!(EmpiricalCcdf::from_points(c.points().to_vec()).is_ok());
            }

            #[test]
            fn adding_larger_incomes_never_lowers_positions_below_them(
                values in prop::collection::vec(1.0f64..1e5, 1..100),
                top in prop::collection::vec(1e5f64..1e9, 0..20),
                top_weight in 0.1f64..5.0,
            ) {
                let survey = Dataset::from_values(values, "s").unwrap();
                let before = empirical_ccdf(&survey).unwrap();
                let after = empirical_ccdf(&merge_datasets(&survey, &top, top_weight).unwrap()).unwrap();
                for q in before.points() {
                    let merged = after.points().iter().find(|r| r.m == q.m).unwrap();
                    prop_assert!(merged.p >= q.p - 1e-15);
                }
            }
        }
    }
}
