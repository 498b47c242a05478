use serde::{Deserialize, Serialize};

use super::{escape_html, escape_md, fmt_fixed, html_page, rounded, write_csv, Format, ReportError};
use crate::model::{Direction, ScoreTable, OVERALL_SCOPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RowKind {
    Category,
    GroupMean,
    OverallMean,
    Rank,
}

struct Row {
    label: String,
    kind: RowKind,
    values: Vec<Option<f64>>,
    decimals: usize,
    best: Vec<usize>,
}

/// Indices of the best rounded values in a row; ties are all best.
fn best_of(values: &[Option<f64>], decimals: usize, direction: Direction) -> Vec<usize> {
    let oriented: Vec<Option<f64>> = values
        .iter()
        .map(|v| v.map(|x| direction.oriented(rounded(x, decimals))))
        .collect();
    let Some(top) = oriented.iter().flatten().copied().reduce(f64::max) else {
        return Vec::new();
    };
    oriented
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == Some(top))
        .map(|(i, _)| i)
        .collect()
}

fn rows(table: &ScoreTable) -> Vec<Row> {
    let d = table.decimals;
    let mut out = Vec::new();
    let mut push = |label: String, kind: RowKind, values: Vec<Option<f64>>| {
        let (decimals, best) = match kind {
            RowKind::Rank => (0, Vec::new()),
            _ => (d, best_of(&values, d, table.direction)),
        };
        out.push(Row {
            label,
            kind,
            values,
            decimals,
            best,
        });
    };
    for (ci, cat) in table.categories.categories().enumerate() {
        push(
            cat.to_string(),
            RowKind::Category,
            table.cells.iter().map(|r| r[ci]).collect(),
        );
    }
    for (gi, g) in table.groups().iter().enumerate() {
        push(
            format!("{g} mean"),
            RowKind::GroupMean,
            table.group_means.iter().map(|r| r[gi]).collect(),
        );
    }
    push("overall mean".into(), RowKind::OverallMean, table.overall_mean.clone());
    if let Some(r) = table.rank_row(OVERALL_SCOPE) {
        push(
            "overall rank".into(),
            RowKind::Rank,
            r.ranks.iter().map(|v| v.map(f64::from)).collect(),
        );
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    label: String,
    kind: RowKind,
    values: Vec<Option<f64>>,
    best: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    metric: String,
    direction: Direction,
    decimals: usize,
    models: Vec<String>,
    rows: Vec<JsonRow>,
}

/// Renders categories in set order, then group means, the overall mean and
/// the overall rank. The best value of each score row is marked in Markdown
/// (bold) and HTML (`<strong>`) and listed under `best` in JSON.
pub fn render_score_table(table: &ScoreTable, format: Format) -> String {
    let rows = rows(table);
    let cell = |r: &Row, v: Option<f64>| v.map(|x| fmt_fixed(x, r.decimals)).unwrap_or_default();
    match format {
        Format::Csv => {
            let mut out = vec![std::iter::once("row".to_string())
                .chain(table.models.iter().cloned())
                .collect::<Vec<_>>()];
            for r in &rows {
                out.push(
                    std::iter::once(r.label.clone())
                        .chain(r.values.iter().map(|&v| cell(r, v)))
                        .collect(),
                );
            }
            write_csv(&out)
        }
        Format::Json => {
            let doc = JsonTable {
                metric: table.metric.clone(),
                direction: table.direction,
                decimals: table.decimals,
                models: table.models.clone(),
                rows: rows
                    .iter()
                    .map(|r| JsonRow {
                        label: r.label.clone(),
                        kind: r.kind,
                        values: r.values.iter().map(|v| v.map(|x| rounded(x, r.decimals))).collect(),
                        best: r.best.clone(),
                    })
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
            s.push('\n');
            s
        }
        Format::Md => {
            let mut s = format!("**{}**\n\n|  |", escape_md(&table.metric));
            for m in &table.models {
                s.push_str(&format!(" {} |", escape_md(m)));
            }
            s.push_str("\n|---|");
            s.push_str(&"---:|".repeat(table.models.len()));
            s.push('\n');
            for r in &rows {
                s.push_str(&format!("| {} |", escape_md(&r.label)));
                for (i, &v) in r.values.iter().enumerate() {
                    let text = v.map(|x| fmt_fixed(x, r.decimals)).unwrap_or_else(|| "-".into());
                    if r.best.contains(&i) {
                        s.push_str(&format!(" **{text}** |"));
                    } else {
                        s.push_str(&format!(" {text} |"));
                    }
                }
                s.push('\n');
            }
            s
        }
        Format::Html => {
            let mut b = format!("<h2>{}</h2>\n<table>\n<tr><th></th>", escape_html(&table.metric));
            for m in &table.models {
                b.push_str(&format!("<th>{}</th>", escape_html(m)));
            }
            b.push_str("</tr>\n");
            for r in &rows {
                b.push_str(&format!("<tr><td>{}</td>", escape_html(&r.label)));
                for (i, &v) in r.values.iter().enumerate() {
                    let text = v.map(|x| fmt_fixed(x, r.decimals)).unwrap_or_else(|| "-".into());
                    if r.best.contains(&i) {
                        b.push_str(&format!("<td><strong>{text}</strong></td>"));
                    } else {
                        b.push_str(&format!("<td>{text}</td>"));
                    }
                }
                b.push_str("</tr>\n");
            }
            b.push_str("</table>\n");
            html_page(&table.metric, &b)
        }
    }
}

/// Row-labelled numeric matrix recovered from a rendered table.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedMatrix {
    pub models: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl RenderedMatrix {
    pub fn row(&self, label: &str) -> Option<&[Option<f64>]> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }
}

fn parse_err(what: &str, reason: impl ToString) -> ReportError {
    ReportError::Parse {
        what: what.into(),
        reason: reason.to_string(),
    }
}

pub fn parse_csv(text: &str) -> Result<RenderedMatrix, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err("CSV table", e))?.clone();
    let models: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err("CSV table", e))?;
        let label = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|e| parse_err("CSV cell", e))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((label, values));
    }
    Ok(RenderedMatrix { models, rows })
}

pub fn parse_json(text: &str) -> Result<RenderedMatrix, ReportError> {
    let doc: JsonTable = serde_json::from_str(text).map_err(|e| parse_err("JSON table", e))?;
    Ok(RenderedMatrix {
        models: doc.models,
        rows: doc.rows.into_iter().map(|r| (r.label, r.values)).collect(),
    })
}
