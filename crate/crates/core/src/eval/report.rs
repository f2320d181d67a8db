//! Report rendering: a Markdown table, CSV and full-precision JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{EvalReport, RowValue};
use crate::metrics::{AggregateScore, Aggregation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected markdown, csv or structured)")),
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(report),
        ReportFormat::Csv => csv_table(report),
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
            out
        }
    }
}

fn pct(score: &AggregateScore, agg: Aggregation) -> f64 {
    score.f1(agg) * 100.0
}

/// `0.013` -> `.01`
fn se_fraction(se: f64) -> String {
    let s = format!("{se:.2}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}

fn cell(score: &AggregateScore, agg: Aggregation) -> String {
    format!("{:.1} ({})", pct(score, agg), se_fraction(score.f1_macro_se))
}

fn delta_cell(delta: Option<f64>) -> String {
    match delta {
        None => "n/a".to_string(),
        Some(d) => {
            let s = format!("{d:+.1}%");
            if s == "+0.0%" || s == "-0.0%" {
                "0.0%".to_string()
            } else {
                s
            }
        }
    }
}

fn markdown(report: &EvalReport) -> String {
    let agg = report.aggregation;
    let mut out = String::new();
    writeln!(out, "# {}", report.model_name).unwrap();
    writeln!(out).unwrap();
    for note in &report.notes {
        writeln!(out, "- {note}").unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "| Split | n | Before-CR | After-CR | Δ |").unwrap();
    writeln!(out, "|---|---:|---:|---:|---:|").unwrap();
    for row in &report.rows {
        let label = row.subset.label();
        match &row.value {
            RowValue::Aggregate(a) => writeln!(out, "| {label} | {} | {} | | |", row.n, cell(a, agg)).unwrap(),
            RowValue::Delta(d) => writeln!(
                out,
                "| {label} | {} | {} | {} | {} |",
                row.n,
                cell(&d.before, agg),
                cell(&d.after, agg),
                delta_cell(d.delta_pct)
            )
            .unwrap(),
        }
    }
    out
}

fn csv_table(report: &EvalReport) -> String {
    let agg = report.aggregation;
    let one = |v: f64| format!("{v:.1}");
    let two = |v: f64| format!("{v:.2}");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["split", "n", "before_f1", "before_se", "after_f1", "after_se", "delta_pct"])
        .expect("in-memory write");
    for row in &report.rows {
        let n = row.n.to_string();
        let record = match &row.value {
            RowValue::Aggregate(a) => [row.subset.label().to_string(), n, one(pct(a, agg)), two(a.f1_macro_se), String::new(), String::new(), String::new()],
            RowValue::Delta(d) => [
                row.subset.label().to_string(),
                n,
                one(pct(&d.before, agg)),
                two(d.before.f1_macro_se),
                one(pct(&d.after, agg)),
                two(d.after.f1_macro_se),
                d.delta_pct.map(one).unwrap_or_default(),
            ],
        };
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
