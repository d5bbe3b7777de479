use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub train: String,
    pub test: String,
    pub strategy: String,
    pub scope: String,
}

impl CellKey {
    pub fn new(train: &str, test: &str, strategy: &str, scope: &str) -> Self {
        CellKey {
            train: train.into(),
            test: test.into(),
            strategy: strategy.into(),
            scope: scope.into(),
        }
    }

    pub fn is_within(&self) -> bool {
        self.train == self.test
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{} [{} / {}]", self.train, self.test, self.strategy, self.scope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(flatten)]
    pub key: CellKey,
    pub per_class: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Bias correlations `c_k` for classifiers trained on one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub domain: String,
    pub strategy: String,
    /// `input` or `kernel`.
    pub space: String,
    pub scope: String,
    /// Measured before (`pre`) or after (`post`) the projection.
    pub stage: String,
    pub per_class: BTreeMap<String, f64>,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreCounts {
    pub dataset: String,
    pub class: String,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub classes: Vec<String>,
    pub cells: Vec<CellResult>,
    pub correlations: Vec<CorrelationResult>,
    pub genre_histogram: Vec<GenreCounts>,
    pub config_fingerprint: String,
}

/// Unvalidated results as produced by a run.
#[derive(Debug, Clone, Default)]
pub struct RawResults {
    pub classes: Vec<String>,
    /// Cells that must be present.
    pub declared: Vec<CellKey>,
    pub cells: BTreeMap<CellKey, BTreeMap<String, f64>>,
    pub correlations: Vec<(CorrelationKey, BTreeMap<String, f64>)>,
    pub genre_histogram: Vec<GenreCounts>,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationKey {
    pub domain: String,
    pub strategy: String,
    pub space: String,
    pub scope: String,
    pub stage: String,
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Validates that every declared cell carries an AUC in [0, 1] for every
/// class, then fills in the means.
pub fn build_report(raw: RawResults) -> Result<ExperimentReport> {
    let mut cells = Vec::with_capacity(raw.declared.len());
    let mut seen = BTreeSet::new();
    for key in &raw.declared {
        if !seen.insert(key) {
            continue;
        }
        let per_class = raw
            .cells
            .get(key)
            .ok_or_else(|| Error::IncompleteMatrix(format!("cell {key} is missing")))?;
        for class in &raw.classes {
            match per_class.get(class) {
                None => return Err(Error::IncompleteMatrix(format!("cell {key} has no AUC for class {class}"))),
                Some(a) if !(0.0..=1.0).contains(a) => {
                    return Err(Error::validation(format!("cell {key}, class {class}: AUC {a} outside [0, 1]")))
                }
                _ => {}
            }
        }
        if per_class.is_empty() {
            return Err(Error::IncompleteMatrix(format!("cell {key} has no classes")));
        }
        cells.push(CellResult {
            key: key.clone(),
            mean: mean(per_class.values().copied()),
            per_class: per_class.clone(),
        });
    }
    let correlations = raw
        .correlations
        .into_iter()
        .map(|(k, per_class)| CorrelationResult {
            domain: k.domain,
            strategy: k.strategy,
            space: k.space,
            scope: k.scope,
            stage: k.stage,
            mean_abs: mean(per_class.values().map(|c| c.abs())),
            per_class,
        })
        .collect();
    Ok(ExperimentReport {
        classes: raw.classes,
        cells,
        correlations,
        genre_histogram: raw.genre_histogram,
        config_fingerprint: raw.config_fingerprint,
    })
}

impl ExperimentReport {
    pub fn cell(&self, train: &str, test: &str, strategy: &str, scope: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.key.train == train && c.key.test == test && c.key.strategy == strategy && c.key.scope == scope)
    }

    /// Mean over the within-domain (or cross-domain) cells of one strategy and scope.
    pub fn mean_auc(&self, strategy: &str, scope: &str, within: bool) -> Option<f64> {
        let sel: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.key.strategy == strategy && c.key.scope == scope && c.key.is_within() == within)
            .map(|c| c.mean)
            .collect();
        (!sel.is_empty()).then(|| mean(sel))
    }

    /// Concatenates reports; later duplicates of a cell or correlation entry are dropped.
    pub fn merge(reports: &[ExperimentReport]) -> Result<ExperimentReport> {
        let first = reports.first().ok_or_else(|| Error::validation("no reports to merge"))?;
        let mut out = ExperimentReport {
            classes: first.classes.clone(),
            cells: Vec::new(),
            correlations: Vec::new(),
            genre_histogram: first.genre_histogram.clone(),
            config_fingerprint: first.config_fingerprint.clone(),
        };
        for r in reports {
            if r.classes != out.classes {
                return Err(Error::validation("reports cover different class lists"));
            }
            for c in &r.cells {
                if !out.cells.iter().any(|o| o.key == c.key) {
                    out.cells.push(c.clone());
                }
            }
            for c in &r.correlations {
                let dup = out.correlations.iter().any(|o| {
                    (&o.domain, &o.strategy, &o.space, &o.scope, &o.stage)
                        == (&c.domain, &c.strategy, &c.space, &c.scope, &c.stage)
                });
                if !dup {
                    out.correlations.push(c.clone());
                }
            }
        }
        Ok(out)
    }
}
