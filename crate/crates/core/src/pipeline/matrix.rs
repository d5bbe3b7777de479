use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{DebiasKind, ExperimentConfig, Scope, Strategy};
use super::corpus::{load_corpus, AccessAudit, Corpus};
use super::run::{run_strategy_on, RunOutput};
use crate::error::{Error, Result};
use crate::evaluation::{render_table, ExperimentReport, Layout};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone)]
pub struct MatrixOutput {
    /// One report per (strategy, scope); the baseline appears once per scope.
    pub reports: Vec<(Strategy, Scope, ExperimentReport)>,
    pub combined: ExperimentReport,
    pub audit: BTreeMap<String, AccessAudit>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `report.json` plus every layout the report supports as
/// `<layout>.txt` and `<layout>.csv`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(REPORT_FILE), report)?;
    for (layout, name) in [(Layout::Table1, "table1"), (Layout::Fig3, "fig3"), (Layout::Fig2, "fig2")] {
        match render_table(report, layout) {
            Ok(r) => {
                write_text(&dir.join(format!("{name}.txt")), &r.text)?;
                write_text(&dir.join(format!("{name}.csv")), &r.csv)?;
            }
            Err(Error::Layout(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Output directory of a single run.
pub fn run_dir(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.join(format!("{}-{}", config.strategy, config.scope))
}

pub fn write_run(config: &ExperimentConfig, out: &RunOutput) -> Result<PathBuf> {
    let dir = run_dir(config);
    write_report(&dir, &out.report)?;
    if config.instrument {
        write_json(&dir.join("audit.json"), &out.audit)?;
    }
    Ok(dir)
}

pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn relabel(report: &ExperimentReport, scope: Scope) -> ExperimentReport {
    let mut r = report.clone();
    for c in &mut r.cells {
        c.key.scope = scope.as_str().to_string();
    }
    r
}

#[derive(Serialize)]
struct Partial<'a> {
    completed: Vec<(String, String)>,
    failed: (String, String),
    error: &'a str,
}

/// Runs every (strategy, scope) pair on one corpus. The baseline (`none`) is
/// always included and computed once; so is `K`, which has no scope.
pub fn run_matrix_on(corpus: &Corpus, base: &ExperimentConfig, strategies: &[Strategy], scopes: &[Scope]) -> Result<MatrixOutput> {
    if scopes.is_empty() {
        return Err(Error::Config("at least one scope is required".into()));
    }
    let mut order = vec![Strategy::None];
    for s in strategies {
        if !order.contains(s) {
            order.push(*s);
        }
    }
    let mut scope_list: Vec<Scope> = Vec::new();
    for s in scopes {
        if !scope_list.contains(s) {
            scope_list.push(*s);
        }
    }

    let mut reports: Vec<(Strategy, Scope, ExperimentReport)> = Vec::new();
    let mut audit = BTreeMap::new();
    for &strategy in &order {
        let runs: Vec<Scope> = if strategy.debias() == DebiasKind::Off {
            vec![scope_list[0]]
        } else {
            scope_list.clone()
        };
        for scope in runs {
            let cfg = ExperimentConfig {
                strategy,
                scope,
                ..base.clone()
            };
            match run_strategy_on(corpus, &cfg) {
                Ok(out) => {
                    audit.extend(out.audit);
                    if strategy.debias() == DebiasKind::Off {
                        for &s in &scope_list {
                            reports.push((strategy, s, relabel(&out.report, s)));
                        }
                    } else {
                        reports.push((strategy, scope, out.report));
                    }
                }
                Err(e) => {
                    let msg = e.to_string();
                    let partial = Partial {
                        completed: reports.iter().map(|(s, c, _)| (s.to_string(), c.to_string())).collect(),
                        failed: (strategy.to_string(), scope.to_string()),
                        error: &msg,
                    };
                    if ensure_dir(&base.output_dir.join("runs")).is_ok() {
                        let _ = write_json(&base.output_dir.join("partial.json"), &partial);
                        for (s, c, r) in &reports {
                            let _ = write_json(&base.output_dir.join("runs").join(format!("{s}-{c}.json")), r);
                        }
                    }
                    return Err(e.context(format!("matrix aborted at strategy={strategy} scope={scope}")));
                }
            }
        }
    }

    let all: Vec<ExperimentReport> = reports.iter().map(|(_, _, r)| r.clone()).collect();
    let mut combined = ExperimentReport::merge(&all)?;
    let mut extra: Vec<&str> = vec!["matrix"];
    extra.extend(order.iter().map(|s| s.as_str()));
    extra.extend(scope_list.iter().map(|s| s.as_str()));
    combined.config_fingerprint = base.fingerprint(&extra);
    Ok(MatrixOutput {
        reports,
        combined,
        audit,
    })
}

/// Loads the corpus, runs the matrix and writes `runs/<strategy>-<scope>.json`,
/// the combined report with its renderings, and `audit.json` when instrumented.
pub fn run_matrix(base: &ExperimentConfig, strategies: &[Strategy], scopes: &[Scope]) -> Result<MatrixOutput> {
    let corpus = load_corpus(base)?;
    let out = run_matrix_on(&corpus, base, strategies, scopes)?;
    let dir = &base.output_dir;
    ensure_dir(&dir.join("runs"))?;
    for (s, c, r) in &out.reports {
        write_json(&dir.join("runs").join(format!("{s}-{c}.json")), r)?;
    }
    write_report(dir, &out.combined)?;
    if base.instrument {
        write_json(&dir.join("audit.json"), &out.audit)?;
    }
    Ok(out)
}
