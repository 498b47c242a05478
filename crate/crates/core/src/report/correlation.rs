use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{escape_html, escape_md, fmt_fixed, html_page, write_csv, Format, ReportError};
use crate::metrics::CorrelationMatrix;
use crate::model::CorrelationKind;

/// External leaderboard scores: `{benchmark: {model: score}}`.
pub type BenchmarkScores = BTreeMap<String, BTreeMap<String, f64>>;

pub fn load_benchmarks(text: &str) -> Result<BenchmarkScores, ReportError> {
    serde_json::from_str(text).map_err(|e| ReportError::Parse {
        what: "benchmark file".into(),
        reason: e.to_string(),
    })
}

/// One score vector per benchmark, aligned with `models`.
pub fn benchmark_vectors(
    scores: &BenchmarkScores,
    models: &[String],
) -> Result<Vec<(String, Vec<f64>)>, ReportError> {
    scores
        .iter()
        .map(|(bench, by_model)| {
            let values = models
                .iter()
                .map(|m| {
                    by_model.get(m).copied().ok_or_else(|| ReportError::MissingModel {
                        benchmark: bench.clone(),
                        model: m.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((bench.clone(), values))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub row: String,
    pub col: String,
    pub value: f64,
}

/// JSON rendering: the full matrix plus a flat cell list for heatmaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDocument {
    pub kind: CorrelationKind,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub cells: Vec<HeatmapCell>,
}

/// Tables show the lower triangle with two decimals; JSON carries the full
/// matrix at full precision.
pub fn render_correlations(m: &CorrelationMatrix, format: Format) -> Result<String, ReportError> {
    if !m.is_symmetric() {
        return Err(ReportError::Asymmetric);
    }
    let n = m.names.len();
    let cell = |i: usize, j: usize| if j <= i { fmt_fixed(m.values[i][j], 2) } else { String::new() };
    Ok(match format {
        Format::Json => {
            let doc = CorrelationDocument {
                kind: m.kind,
                names: m.names.clone(),
                values: m.values.clone(),
                cells: (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| HeatmapCell {
                        row: m.names[i].clone(),
                        col: m.names[j].clone(),
                        value: m.values[i][j],
                    })
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("correlations serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = vec![std::iter::once(String::new()).chain(m.names.iter().cloned()).collect::<Vec<_>>()];
            for i in 0..n {
                rows.push(std::iter::once(m.names[i].clone()).chain((0..n).map(|j| cell(i, j))).collect());
            }
            write_csv(&rows)
        }
        Format::Md => {
            let mut s = String::from("|  |");
            for name in &m.names {
                s.push_str(&format!(" {} |", escape_md(name)));
            }
            s.push_str(&format!("\n|---|{}\n", "---:|".repeat(n)));
            for i in 0..n {
                s.push_str(&format!("| {} |", escape_md(&m.names[i])));
                for j in 0..n {
                    s.push_str(&format!(" {} |", cell(i, j)));
                }
                s.push('\n');
            }
            s
        }
        Format::Html => {
            let mut b = String::from("<table>\n<tr><th></th>");
            for name in &m.names {
                b.push_str(&format!("<th>{}</th>", escape_html(name)));
            }
            b.push_str("</tr>\n");
            for i in 0..n {
                b.push_str(&format!("<tr><td>{}</td>", escape_html(&m.names[i])));
                for j in 0..n {
                    b.push_str(&format!("<td>{}</td>", cell(i, j)));
                }
                b.push_str("</tr>\n");
            }
            b.push_str("</table>\n");
            html_page("Correlation matrix", &b)
        }
    })
}
