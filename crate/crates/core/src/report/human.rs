use serde::{Deserialize, Serialize};

use super::{escape_html, escape_md, fmt_fixed, html_page, write_csv, Format, ReportError};
use crate::metrics::{aggregate_cells, delta_percent};
use crate::model::CategorySet;

const DECIMALS: usize = 4;

/// One category: model scores, the best of them, and the human gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub models: Vec<Option<f64>>,
    pub best_index: Option<usize>,
    pub best: Option<f64>,
    pub human: Option<f64>,
    /// `100 (human - best) / best`.
    pub delta_percent: Option<f64>,
}

/// A group or overall row. Two gap figures are kept because they differ:
/// the gap between the human mean and the best model mean, and the mean of
/// the per-category gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateComparison {
    pub label: String,
    pub models: Vec<Option<f64>>,
    pub best_index: Option<usize>,
    pub best: Option<f64>,
    pub human: Option<f64>,
    pub delta_percent: Option<f64>,
    pub mean_category_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanComparison {
    pub models: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// Group rows in set order, then `overall`.
    pub aggregates: Vec<AggregateComparison>,
}

fn best(values: &[Option<f64>]) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .fold(None, |acc: Option<(usize, f64)>, (i, x)| match acc {
            Some((_, b)) if b >= x => acc,
            _ => Some((i, x)),
        })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl HumanComparison {
    /// `models` and `human` hold GC@1 category cells aligned with `set`.
    pub fn build(
        set: &CategorySet,
        models: &[(String, Vec<Option<f64>>)],
        human: &[Option<f64>],
    ) -> Result<Self, ReportError> {
        if human.len() != set.len() {
            return Err(ReportError::Misaligned(format!(
                "human row has {} cells for {} categories",
                human.len(),
                set.len()
            )));
        }
        if let Some((name, _)) = models.iter().find(|(_, c)| c.len() != set.len()) {
            return Err(ReportError::Misaligned(format!("model `{name}` row length")));
        }
        let mut rows = Vec::with_capacity(set.len());
        for (ci, cat) in set.categories().enumerate() {
            let values: Vec<Option<f64>> = models.iter().map(|(_, c)| c[ci]).collect();
            let b = best(&values);
            let h = human[ci];
            let delta = match (h, b) {
                (Some(h), Some((_, b))) => Some(delta_percent(h, b)?),
                _ => None,
            };
            rows.push(ComparisonRow {
                label: cat.to_string(),
                models: values,
                best_index: b.map(|(i, _)| i),
                best: b.map(|(_, v)| v),
                human: h,
                delta_percent: delta,
            });
        }

        let model_rows = models
            .iter()
            .map(|(_, c)| aggregate_cells(c, set))
            .collect::<Result<Vec<_>, _>>()?;
        let human_row = aggregate_cells(human, set)?;
        let groups = set.groups();
        let mut aggregates = Vec::with_capacity(groups.len() + 1);
        let mut push = |label: String, values: Vec<Option<f64>>, h: Option<f64>, deltas: Vec<f64>| -> Result<(), ReportError> {
            let b = best(&values);
            let delta = match (h, b) {
                (Some(h), Some((_, b))) => Some(delta_percent(h, b)?),
                _ => None,
            };
            aggregates.push(AggregateComparison {
                label,
                models: values,
                best_index: b.map(|(i, _)| i),
                best: b.map(|(_, v)| v),
                human: h,
                delta_percent: delta,
                mean_category_delta: mean(deltas.into_iter()),
            });
            Ok(())
        };
        for (gi, g) in groups.iter().enumerate() {
            let deltas = set
                .categories()
                .zip(&rows)
                .filter(|(c, _)| set.group_of(c) == Some(g))
                .filter_map(|(_, r)| r.delta_percent)
                .collect();
            push(
                format!("{g} mean"),
                model_rows.iter().map(|r| r.group_means[gi]).collect(),
                human_row.group_means[gi],
                deltas,
            )?;
        }
        push(
            "overall mean".into(),
            model_rows.iter().map(|r| r.overall).collect(),
            human_row.overall,
            rows.iter().filter_map(|r| r.delta_percent).collect(),
        )?;
        Ok(Self {
            models: models.iter().map(|(n, _)| n.clone()).collect(),
            rows,
            aggregates,
        })
    }

    pub fn aggregate(&self, label: &str) -> Option<&AggregateComparison> {
        self.aggregates.iter().find(|a| a.label == label)
    }

    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// How a published aggregate Δ% relates to the two ways of computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaAudit {
    pub label: String,
    pub printed: f64,
    pub direct: Option<f64>,
    pub mean_category_delta: Option<f64>,
    pub matches_direct: bool,
    pub matches_category_mean: bool,
}

impl DeltaAudit {
    /// The printed figure is not the gap between the human and best means.
    pub fn flagged(&self) -> bool {
        !self.matches_direct
    }
}

pub fn audit_delta(row: &AggregateComparison, printed: f64, tolerance: f64) -> DeltaAudit {
    let close = |v: Option<f64>| v.is_some_and(|x| (x - printed).abs() <= tolerance);
    DeltaAudit {
        label: row.label.clone(),
        printed,
        direct: row.delta_percent,
        mean_category_delta: row.mean_category_delta,
        matches_direct: close(row.delta_percent),
        matches_category_mean: close(row.mean_category_delta),
    }
}

fn value(v: Option<f64>) -> String {
    v.map(|x| fmt_fixed(x, DECIMALS)).unwrap_or_default()
}

fn signed(v: Option<f64>) -> String {
    v.map(|x| {
        let s = fmt_fixed(x, DECIMALS);
        if s.starts_with('-') {
            format!("{s}%")
        } else {
            format!("+{s}%")
        }
    })
    .unwrap_or_default()
}

/// Category rows, then group and overall rows. The best model per row is
/// underlined in Markdown/HTML; aggregate rows carry both gap figures.
pub fn render_human_comparison(cmp: &HumanComparison, format: Format) -> String {
    struct Line<'a> {
        label: &'a str,
        models: &'a [Option<f64>],
        best_index: Option<usize>,
        human: Option<f64>,
        delta: Option<f64>,
        mean_delta: Option<f64>,
    }
    let lines: Vec<Line> = cmp
        .rows
        .iter()
        .map(|r| Line {
            label: &r.label,
            models: &r.models,
            best_index: r.best_index,
            human: r.human,
            delta: r.delta_percent,
            mean_delta: None,
        })
        .chain(cmp.aggregates.iter().map(|a| Line {
            label: &a.label,
            models: &a.models,
            best_index: a.best_index,
            human: a.human,
            delta: a.delta_percent,
            mean_delta: a.mean_category_delta,
        }))
        .collect();
    let header: Vec<String> = std::iter::once("row".to_string())
        .chain(cmp.models.iter().cloned())
        .chain(["human".into(), "delta_percent".into(), "mean_category_delta_percent".into()])
        .collect();
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(cmp).expect("comparison serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = vec![header];
            for l in &lines {
                let mut r = vec![l.label.to_string()];
                r.extend(l.models.iter().map(|&v| value(v)));
                r.push(value(l.human));
                r.push(l.delta.map(|x| fmt_fixed(x, DECIMALS)).unwrap_or_default());
                r.push(l.mean_delta.map(|x| fmt_fixed(x, DECIMALS)).unwrap_or_default());
                rows.push(r);
            }
            write_csv(&rows)
        }
        Format::Md => {
            let mut s = String::from("|  |");
            for m in &cmp.models {
                s.push_str(&format!(" {} |", escape_md(m)));
            }
            s.push_str(" Human | Δ% | mean category Δ% |\n|---|");
            s.push_str(&"---:|".repeat(cmp.models.len() + 3));
            s.push('\n');
            for l in &lines {
                s.push_str(&format!("| {} |", escape_md(l.label)));
                for (i, &v) in l.models.iter().enumerate() {
                    let text = v.map(|x| fmt_fixed(x, DECIMALS)).unwrap_or_else(|| "-".into());
                    if l.best_index == Some(i) {
                        s.push_str(&format!(" <u>{text}</u> |"));
                    } else {
                        s.push_str(&format!(" {text} |"));
                    }
                }
                s.push_str(&format!(" {} | {} | {} |\n", value(l.human), signed(l.delta), signed(l.mean_delta)));
            }
            s
        }
        Format::Html => {
            let mut b = String::from("<table>\n<tr><th></th>");
            for m in &cmp.models {
                b.push_str(&format!("<th>{}</th>", escape_html(m)));
            }
            b.push_str("<th>Human</th><th>Δ%</th><th>mean category Δ%</th></tr>\n");
            for l in &lines {
                b.push_str(&format!("<tr><td>{}</td>", escape_html(l.label)));
                for (i, &v) in l.models.iter().enumerate() {
                    let text = v.map(|x| fmt_fixed(x, DECIMALS)).unwrap_or_else(|| "-".into());
                    if l.best_index == Some(i) {
                        b.push_str(&format!("<td><u>{text}</u></td>"));
                    } else {
                        b.push_str(&format!("<td>{text}</td>"));
                    }
                }
                b.push_str(&format!(
                    "<td>{}</td><td>{}</td><td>{}</td></tr>\n",
                    value(l.human),
                    signed(l.delta),
                    signed(l.mean_delta)
                ));
            }
            b.push_str("</table>\n");
            html_page("GC@1: models and humans", &b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn human_equal_to_best_gives_zero_gaps() {
        let set = CategorySet::mme();
        let a: Vec<Option<f64>> = (0..14).map(|i| Some(0.3 + i as f64 * 0.01)).collect();
        let b: Vec<Option<f64>> = a.iter().map(|v| v.map(|x| x - 0.05)).collect();
        let cmp = HumanComparison::build(&set, &[("a".into(), a.clone()), ("b".into(), b)], &a).unwrap();
        assert!(cmp.rows.iter().all(|r| r.delta_percent == Some(0.0) && r.best_index == Some(0)));
        assert!(cmp.aggregates.iter().all(|r| r.delta_percent == Some(0.0)));
    }

    #[test]
    fn aggregate_gap_figures_can_differ() {
        let set = CategorySet::mme();
        let mut a = vec![Some(0.5); 14];
        let mut b = vec![Some(0.4); 14];
        a[0] = Some(0.2);
        b[0] = Some(0.6);
        let human = vec![Some(0.6); 14];
        let cmp = HumanComparison::build(&set, &[("a".into(), a), ("b".into(), b)], &human).unwrap();
        let overall = cmp.aggregate("overall mean").unwrap();
        let audit = audit_delta(overall, overall.mean_category_delta.unwrap(), 1e-9);
        assert!(audit.matches_category_mean);
        assert!(audit.flagged());
        let md = render_human_comparison(&cmp, Format::Md);
        assert!(md.contains("| existence | 0.2000 | <u>0.6000</u> | 0.6000 | +0.0000% |"));
    }
}
