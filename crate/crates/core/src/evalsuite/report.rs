//! Aggregated verdict tables in CSV or JSON.

use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::{EvalError, RunReport, VerdictCategory};
use crate::agent::PromptVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(EvalError::UnknownFormat(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub variant: PromptVariant,
    pub condition_or_step: String,
    pub verdict: VerdictCategory,
    pub count: usize,
    /// Percentage with one decimal, as tenths of a percent.
    pub tenths: u32,
}

impl ReportRow {
    pub fn percent(&self) -> f64 {
        f64::from(self.tenths) / 10.0
    }
}

/// Splits 100.0 % over `counts` in steps of 0.1 % so that the parts add up
/// exactly (largest remainder; ties go to the earlier entry).
pub fn percentages(counts: &[usize]) -> Vec<u32> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0; counts.len()];
    }
    let mut parts: Vec<(u32, usize, usize)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let scaled = c * 1000;
            ((scaled / total) as u32, scaled % total, i)
        })
        .collect();
    let assigned: u32 = parts.iter().map(|p| p.0).sum();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| parts[b].1.cmp(&parts[a].1).then(a.cmp(&b)));
    for &i in order.iter().take((1000 - assigned) as usize) {
        parts[i].0 += 1;
    }
    parts.into_iter().map(|p| p.0).collect()
}

impl RunReport {
    /// One row per (variant, stratum, verdict), including zero counts.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut strata: Vec<(u32, &str)> = self
            .records
            .iter()
            .map(|r| (r.stratum_order, r.stratum.as_str()))
            .collect();
        strata.sort();
        strata.dedup();
        let mut rows = Vec::new();
        for variant in PromptVariant::ALL {
            for &(_, stratum) in &strata {
                let counts: Vec<usize> = VerdictCategory::ALL
                    .iter()
                    .map(|v| {
                        self.records
                            .iter()
                            .filter(|r| r.variant == variant && r.stratum == stratum && r.verdict.category == *v)
                            .count()
                    })
                    .collect();
                if counts.iter().sum::<usize>() == 0 {
                    continue;
                }
                for ((verdict, count), tenths) in VerdictCategory::ALL.into_iter().zip(&counts).zip(percentages(&counts)) {
                    rows.push(ReportRow {
                        variant,
                        condition_or_step: stratum.to_string(),
                        verdict,
                        count: *count,
                        tenths,
                    });
                }
            }
        }
        rows
    }
}

pub const CSV_HEADER: &str = "variant,condition_or_step,verdict,count,percent";

pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    let rows = report.rows();
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{:.1}\n",
                    r.variant,
                    r.condition_or_step,
                    r.verdict,
                    r.count,
                    r.percent()
                ));
            }
            out
        }
        ReportFormat::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "variant": r.variant,
                        "condition_or_step": r.condition_or_step,
                        "verdict": r.verdict,
                        "count": r.count,
                        "percent": r.percent(),
                    })
                })
                .collect();
            let doc = json!({
                "kind": report.kind,
                "runs": report.records.len(),
                "rows": rows,
                "records": report.records,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
    }
}
