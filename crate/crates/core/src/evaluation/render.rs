use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::report::{CellResult, ExperimentReport};
use crate::error::{Error, Result};

/// Display order of strategies; anything else follows in order of appearance.
pub const STRATEGY_ORDER: [&str; 6] = ["none", "LDA", "mLDA", "K", "KLDA", "mKLDA"];
pub const SCOPE_ORDER: [&str; 2] = ["global", "classwise"];
pub const BASELINE: &str = "none";

/// Deltas larger than this many percentage points are flagged.
pub const FLAG_THRESHOLD_PP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Table1,
    Fig3,
    Fig2,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Layout::Table1),
            "fig3" => Ok(Layout::Fig3),
            "fig2" => Ok(Layout::Fig2),
            other => Err(Error::Layout(format!("unknown layout {other:?} (expected table1, fig3 or fig2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub csv: String,
}

/// Formats an AUC in [0, 1] as a percentage with two decimals.
pub fn format_pct(auc: f64) -> String {
    format!("{:.2}", 100.0 * auc)
}

/// `"85.87 (+0.86)"` for a strategy value against its baseline, plus whether
/// the delta exceeds the flag threshold. A delta that rounds to zero prints
/// as `(0.0)`.
pub fn format_with_delta(value: f64, baseline: f64) -> (String, bool) {
    let delta = 100.0 * (value - baseline);
    let rounded = format!("{:.2}", delta.abs());
    let d = if rounded == "0.00" {
        "0.0".to_string()
    } else if delta > 0.0 {
        format!("+{rounded}")
    } else {
        format!("-{rounded}")
    };
    (format!("{} ({d})", format_pct(value)), delta.abs() > FLAG_THRESHOLD_PP)
}

fn ordered<'a>(seen: impl Iterator<Item = &'a str>, canonical: &[&str]) -> Vec<String> {
    let mut all: Vec<&str> = Vec::new();
    for s in seen {
        if !all.contains(&s) {
            all.push(s);
        }
    }
    let mut out: Vec<String> = canonical.iter().filter(|c| all.contains(c)).map(|c| c.to_string()).collect();
    for s in all {
        if !canonical.contains(&s) {
            out.push(s.to_string());
        }
    }
    out
}

fn domains(report: &ExperimentReport) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in &report.cells {
        for d in [&c.key.train, &c.key.test] {
            if !out.contains(d) {
                out.push(d.clone());
            }
        }
    }
    out
}

fn baseline_cell<'a>(report: &'a ExperimentReport, cell: &CellResult) -> Option<&'a CellResult> {
    report
        .cell(&cell.key.train, &cell.key.test, BASELINE, &cell.key.scope)
        .or_else(|| {
            report
                .cells
                .iter()
                .find(|c| c.key.strategy == BASELINE && c.key.train == cell.key.train && c.key.test == cell.key.test)
        })
}

fn pad_table(rows: &[Vec<String>]) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; width];
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    quoted.join(",") + "\n"
}

fn render_table1(report: &ExperimentReport) -> Result<Rendered> {
    if report.cells.is_empty() {
        return Err(Error::Layout("report has no AUC cells".into()));
    }
    let strategies = ordered(report.cells.iter().map(|c| c.key.strategy.as_str()), &STRATEGY_ORDER);
    let scopes = ordered(report.cells.iter().map(|c| c.key.scope.as_str()), &SCOPE_ORDER);
    let doms = domains(report);
    let mut pairs: Vec<(String, String)> = doms.iter().map(|d| (d.clone(), d.clone())).collect();
    for a in &doms {
        for b in &doms {
            if a != b {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }

    let mut header = vec!["strategy".to_string()];
    let mut group = vec![String::new()];
    for scope in &scopes {
        for (i, (a, b)) in pairs.iter().enumerate() {
            group.push(if i == 0 { scope.clone() } else { String::new() });
            header.push(format!("{a}-{b}"));
        }
    }
    let mut rows = vec![group, header];
    let mut csv = csv_line(&["strategy", "scope", "train", "test", "mean_auc", "delta"].map(String::from));
    let mut any_flag = false;
    for strategy in &strategies {
        let mut row = vec![strategy.clone()];
        for scope in &scopes {
            for (a, b) in &pairs {
                let Some(cell) = report.cell(a, b, strategy, scope) else {
                    row.push("-".into());
                    continue;
                };
                let base = (strategy != BASELINE && a != b).then(|| baseline_cell(report, cell)).flatten();
                let (text, delta) = match base {
                    Some(bc) => {
                        let (t, flag) = format_with_delta(cell.mean, bc.mean);
                        any_flag |= flag;
                        (if flag { t + "*" } else { t }, format!("{}", cell.mean - bc.mean))
                    }
                    None => (format_pct(cell.mean), String::new()),
                };
                row.push(text);
                csv.push_str(&csv_line(&[
                    strategy.clone(),
                    scope.clone(),
                    a.clone(),
                    b.clone(),
                    format!("{}", cell.mean),
                    delta,
                ]));
            }
        }
        rows.push(row);
    }
    let mut text = String::from("Mean ROC-AUC (%) by training-test domain; cross-domain deltas vs baseline in parentheses\n");
    text.push_str(&pad_table(&rows));
    if any_flag {
        let _ = writeln!(text, "* |delta| > {FLAG_THRESHOLD_PP} percentage points");
    }
    Ok(Rendered { text, csv })
}

fn render_fig3(report: &ExperimentReport) -> Result<Rendered> {
    if report.correlations.is_empty() {
        return Err(Error::Layout("report has no bias correlations".into()));
    }
    let classes = &report.classes;
    let mut header: Vec<String> = ["domain", "strategy", "space", "scope", "stage"].map(String::from).to_vec();
    header.extend(classes.iter().cloned());
    header.push("mean_abs".into());
    let mut csv = csv_line(&header);
    let mut rows = vec![header];
    let mut sorted: Vec<_> = report.correlations.iter().collect();
    sorted.sort_by_key(|c| {
        let s = STRATEGY_ORDER.iter().position(|x| *x == c.strategy).unwrap_or(STRATEGY_ORDER.len());
        let sc = SCOPE_ORDER.iter().position(|x| *x == c.scope).unwrap_or(SCOPE_ORDER.len());
        (c.space.clone(), sc, s, c.stage != "pre", c.domain.clone())
    });
    for c in sorted {
        let lead = [&c.domain, &c.strategy, &c.space, &c.scope, &c.stage].map(|s| s.to_string());
        let mut text_row = lead.to_vec();
        let mut csv_row = lead.to_vec();
        for k in classes {
            match c.per_class.get(k) {
                Some(v) => {
                    text_row.push(format!("{v:.3}"));
                    csv_row.push(format!("{v}"));
                }
                None => {
                    text_row.push("-".into());
                    csv_row.push(String::new());
                }
            }
        }
        text_row.push(format!("({:.3})", c.mean_abs));
        csv_row.push(format!("{}", c.mean_abs));
        rows.push(text_row);
        csv.push_str(&csv_line(&csv_row));
    }
    let mut text = String::from("Cosine between domain direction and classifier weights; mean |c_k| in parentheses\n");
    text.push_str(&pad_table(&rows));
    Ok(Rendered { text, csv })
}

fn render_fig2(report: &ExperimentReport) -> Result<Rendered> {
    if report.genre_histogram.is_empty() {
        return Err(Error::Layout("report has no genre histogram".into()));
    }
    let mut csv = csv_line(&["dataset", "class", "genre", "count"].map(String::from));
    let mut rows = vec![["dataset", "class", "genre", "count"].map(String::from).to_vec()];
    for h in &report.genre_histogram {
        for (g, n) in &h.counts {
            let row = vec![h.dataset.clone(), h.class.clone(), g.clone(), n.to_string()];
            csv.push_str(&csv_line(&row));
            rows.push(row);
        }
    }
    let mut text = String::from("Positive training examples per genre\n");
    text.push_str(&pad_table(&rows));
    Ok(Rendered { text, csv })
}

pub fn render_table(report: &ExperimentReport, layout: Layout) -> Result<Rendered> {
    match layout {
        Layout::Table1 => render_table1(report),
        Layout::Fig3 => render_fig3(report),
        Layout::Fig2 => render_fig2(report),
    }
}
