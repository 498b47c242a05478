//! Rendering of score tables, human comparisons, correlation matrices and
//! chain strips. Every renderer is a pure function of its input.

mod correlation;
mod human;
mod strip;
mod table;

pub use correlation::{
    benchmark_vectors, load_benchmarks, render_correlations, BenchmarkScores, CorrelationDocument,
};
pub use human::{audit_delta, render_human_comparison, AggregateComparison, ComparisonRow, DeltaAudit, HumanComparison};
pub use strip::{render_chain_strip, StripFormat};
pub use table::{parse_csv, parse_json, render_score_table, RenderedMatrix};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("correlation matrix is not symmetric")]
    Asymmetric,
    #[error("benchmark `{benchmark}` has no score for model `{model}`")]
    MissingModel { benchmark: String, model: String },
    #[error("cannot parse {what}: {reason}")]
    Parse { what: String, reason: String },
    #[error("rows are not aligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Md,
    Html,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Md),
            "html" => Ok(Format::Html),
            other => Err(format!("unknown format `{other}` (expected csv, json, md or html)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Md => "md",
            Format::Html => "html",
        })
    }
}

/// Fixed-decimal rendering without a negative sign on zero.
pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// The value a reader sees after rounding to `decimals`.
pub fn rounded(v: f64, decimals: usize) -> f64 {
    fmt_fixed(v, decimals).parse().expect("formatted float parses")
}

pub(crate) fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) fn escape_md(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub(crate) fn html_page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n\
         <style>\nbody{{font-family:sans-serif;margin:1.5em}}\ntable{{border-collapse:collapse}}\n\
         td,th{{border:1px solid #bbb;padding:.25em .6em;text-align:right}}\nth:first-child,td:first-child{{text-align:left}}\n\
         .strip{{display:flex;gap:1em;align-items:flex-start}}\n.frame{{text-align:center}}\n.frame img{{image-rendering:auto}}\n\
         .note{{color:#a00}}\n</style>\n</head>\n<body>\n{}</body>\n</html>\n",
        escape_html(title),
        body
    )
}

/// RFC 4180 CSV (CRLF line endings) from rows of fields.
pub(crate) fn write_csv(rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .flexible(false)
        .from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}
