//! Reference values transcribed from the published tables, one CSV per table.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::{Error, Result};

const SOURCES: &[(&str, &str)] = &[
    ("table1", include_str!("../../paper_values/table1.csv")),
    ("table2", include_str!("../../paper_values/table2.csv")),
    ("table3", include_str!("../../paper_values/table3.csv")),
    ("table4", include_str!("../../paper_values/table4.csv")),
    ("table5", include_str!("../../paper_values/table5.csv")),
    ("table6", include_str!("../../paper_values/table6.csv")),
    ("table_optW", include_str!("../../paper_values/table_optW.csv")),
    ("table_dewma_zARL", include_str!("../../paper_values/table_dewma_zARL.csv")),
    ("table_dewma_sARL", include_str!("../../paper_values/table_dewma_sARL.csv")),
    ("table_dpm_zARL", include_str!("../../paper_values/table_dpm_zARL.csv")),
];

/// One printed number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaperValue {
    pub value: f64,
    /// Digits after the decimal point as printed.
    pub decimals: u32,
    /// Replications behind the printed value, when it is a simulation result.
    pub replications: Option<u64>,
}

impl PaperValue {
    /// Half a unit in the last printed digit.
    pub fn rounding(&self) -> f64 {
        0.5 * 10f64.powi(-(self.decimals as i32))
    }
}

#[derive(Deserialize)]
struct Record {
    row: String,
    column: String,
    value: String,
    replications: Option<u64>,
}

type Table = HashMap<(String, String), PaperValue>;

fn parse(text: &str) -> Result<Table> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for rec in rdr.deserialize() {
        let rec: Record = rec?;
        let value: f64 = rec
            .value
            .parse()
            .map_err(|_| Error::arg(format!("bad reference value `{}`", rec.value)))?;
        let decimals = rec.value.split_once('.').map_or(0, |(_, d)| d.len() as u32);
        out.insert((rec.row, rec.column), PaperValue { value, decimals, replications: rec.replications });
    }
    Ok(out)
}

fn tables() -> &'static HashMap<&'static str, Table> {
    static TABLES: OnceLock<HashMap<&'static str, Table>> = OnceLock::new();
    TABLES.get_or_init(|| {
        SOURCES
            .iter()
            .map(|(id, text)| (*id, parse(text).unwrap_or_else(|e| panic!("reference table {id}: {e}"))))
            .collect()
    })
}

/// Printed value of `table` at (`row`, `column`), if the table has one.
pub fn lookup(table: &str, row: &str, column: &str) -> Option<PaperValue> {
    tables().get(table)?.get(&(row.to_string(), column.to_string())).copied()
}

/// Ids of the tables with reference values.
pub fn table_ids() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(id, _)| *id)
}

/// Printed values of one table row, in the order of `columns`.
pub fn row(table: &str, row: &str, columns: &[&str]) -> Result<Vec<PaperValue>> {
    columns
        .iter()
        .map(|c| {
            lookup(table, row, c).ok_or_else(|| Error::arg(format!("no reference value for {table} [{row}, {c}]")))
        })
        .collect()
}

/// Agreement of a simulated estimate with a printed value: the difference
/// stays within three combined standard errors plus the print rounding, and
/// within 2% of the printed value (or the rounding, if larger).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub difference: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn mc_agreement(estimate: f64, stderr: f64, replications: u64, paper: PaperValue) -> Agreement {
    let paper_se = paper
        .replications
        .map_or(0.0, |n| stderr * (replications as f64 / n as f64).sqrt());
    let sigma_bound = 3.0 * stderr.hypot(paper_se) + paper.rounding();
    let relative_bound = (0.02 * paper.value.abs()).max(paper.rounding());
    let bound = sigma_bound.min(relative_bound);
    let difference = estimate - paper.value;
    Agreement { difference, bound, pass: difference.abs() <= bound }
}

/// Agreement of a deterministic value with a printed value: relative error
/// at most `rel`, or within the print rounding.
pub fn numeric_agreement(value: f64, paper: PaperValue, rel: f64) -> Agreement {
    let bound = (rel * paper.value.abs()).max(paper.rounding());
    let difference = value - paper.value;
    Agreement { difference, bound, pass: difference.abs() <= bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_table_parses() {
        for id in table_ids() {
            assert!(!tables()[id].is_empty(), "{id}");
        }
    }

    #[test]
    fn decimals_follow_the_print() {
        let v = lookup("table1", "k", "0.25").unwrap();
        assert_eq!(v.value, 0.189);
        assert_eq!(v.decimals, 4);
        let v = lookup("table6", "DMA(w=2)", "1").unwrap();
        assert_eq!((v.value, v.decimals), (17.4, 1));
        assert_eq!(v.rounding(), 0.05);
        let v = lookup("table2", "RRCUSUM(k=0.5, 2of2, WL=3.42, AL=4.8)", "AL*").unwrap();
        assert!(v.value.is_infinite());
        assert_eq!(
            lookup("table3", "CUSUM(k=0.5, limit=4.002)", "0.5").unwrap().replications,
            Some(100_000_000)
        );
        assert!(lookup("table3", "CUSUM(k=0.5, limit=4.002)", "7").is_none());
    }

    #[test]
    fn agreement_bounds() {
        let p = PaperValue { value: 10.0, decimals: 2, replications: None };
        assert!(mc_agreement(10.02, 0.01, 1_000_000, p).pass);
        assert!(!mc_agreement(10.04, 0.01, 1_000_000, p).pass);
        // the relative cap binds for noisy estimates
        assert!(!mc_agreement(10.3, 1.0, 1_000_000, p).pass);
        let p = PaperValue { value: 1.6, decimals: 1, replications: None };
        assert!(mc_agreement(1.645, 0.001, 1_000_000, p).pass);
        assert!(numeric_agreement(168.5, PaperValue { value: 168.0, decimals: 2, replications: None }, 0.005).pass);
    }
}
