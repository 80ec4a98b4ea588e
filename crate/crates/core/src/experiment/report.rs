use std::collections::BTreeSet;
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::scalar::Scalar;

/// `variant` value of rows evaluated on the unre-ranked base lists.
pub const BASELINE_VARIANT: &str = "baseline";
/// `fold` value of cross-fold mean rows.
pub const MEAN_FOLD: &str = "mean";

/// One results CSV row:
/// `dataset,fold,variant,lambda,ndcg,arp,aplt,aclt_literal,lt_coverage,n_users`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub fold: String,
    pub variant: String,
    /// Empty for baseline rows.
    pub lambda: Option<f64>,
    pub ndcg: f64,
    pub arp: f64,
    pub aplt: f64,
    pub aclt_literal: f64,
    pub lt_coverage: f64,
    pub n_users: usize,
}

impl MetricRow {
    pub fn from_report<T: Scalar>(
        dataset: &str,
        fold: usize,
        variant: &str,
        lambda: Option<f64>,
        report: &MetricsReport<T>,
    ) -> Self {
        MetricRow {
            dataset: dataset.to_string(),
            fold: fold.to_string(),
            variant: variant.to_string(),
            lambda,
            ndcg: report.ndcg.as_f64(),
            arp: report.arp.as_f64(),
            aplt: report.aplt.as_f64(),
            aclt_literal: report.aclt_literal.as_f64(),
            lt_coverage: report.lt_coverage.as_f64(),
            n_users: report.n_users,
        }
    }

    fn metrics(&self) -> [f64; 5] {
        [
            self.ndcg,
            self.arp,
            self.aplt,
            self.aclt_literal,
            self.lt_coverage,
        ]
    }
}

pub fn write_rows<W: Write>(rows: &[MetricRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in rows {
        out.serialize(row)?;
    }
    if rows.is_empty() {
        out.write_record([
            "dataset",
            "fold",
            "variant",
            "lambda",
            "ndcg",
            "arp",
            "aplt",
            "aclt_literal",
            "lt_coverage",
            "n_users",
        ])?;
    }
    out.flush().map_err(|e| Error::io("<results csv>", e))?;
    Ok(())
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<MetricRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn fold_key(fold: &str) -> (u64, String) {
    (fold.parse().unwrap_or(u64::MAX), fold.to_string())
}

/// Cross-fold arithmetic means, one row per `(dataset, variant, lambda)` in
/// order of first appearance. Every group must cover every fold present in
/// `rows`; existing mean rows are ignored.
pub fn aggregate(rows: &[MetricRow]) -> Result<Vec<MetricRow>> {
    let rows: Vec<&MetricRow> = rows.iter().filter(|r| r.fold != MEAN_FOLD).collect();
    let folds: BTreeSet<(u64, String)> = rows.iter().map(|r| fold_key(&r.fold)).collect();
    let mut groups: IndexMap<(String, String, Option<u64>), Vec<&MetricRow>> = IndexMap::new();
    for row in &rows {
        groups
            .entry((
                row.dataset.clone(),
                row.variant.clone(),
                row.lambda.map(f64::to_bits),
            ))
            .or_default()
            .push(row);
    }

    let mut missing = Vec::new();
    let mut means = Vec::with_capacity(groups.len());
    for ((dataset, variant, lambda), mut members) in groups {
        members.sort_by_key(|r| fold_key(&r.fold));
        let present: BTreeSet<(u64, String)> = members.iter().map(|r| fold_key(&r.fold)).collect();
        let absent: Vec<&str> = folds
            .difference(&present)
            .map(|(_, f)| f.as_str())
            .collect();
        if !absent.is_empty() || present.len() != members.len() {
            let lambda = lambda
                .map(f64::from_bits)
                .map(|l| l.to_string())
                .unwrap_or_default();
            missing.push(format!(
                "{dataset}/{variant}/{lambda}: [{}]",
                absent.join(", ")
            ));
            continue;
        }
        let n = members.len() as f64;
        let mut sums = [0.0f64; 5];
        let mut users = 0usize;
        for m in &members {
            for (s, v) in sums.iter_mut().zip(m.metrics()) {
                *s += v;
            }
            users += m.n_users;
        }
        let [ndcg, arp, aplt, aclt_literal, lt_coverage] = sums.map(|s| s / n);
        means.push(MetricRow {
            dataset,
            fold: MEAN_FOLD.to_string(),
            variant,
            lambda: lambda.map(f64::from_bits),
            ndcg,
            arp,
            aplt,
            aclt_literal,
            lt_coverage,
            n_users: (users + members.len() / 2) / members.len(),
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingFolds(missing.join("; ")));
    }
    Ok(means)
}
