use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::{load_embeddings, load_manifest, pool_frames, reduce_genres, EmbeddingTable, GenreMap, Manifest, Split};
use crate::error::{Error, Result};
use crate::linalg::{select_rows, Matrix};

/// One dataset after frame pooling, joined to its manifest: row `i` of
/// `features` belongs to `manifest.records()[i]`.
#[derive(Debug, Clone)]
pub struct DomainData {
    pub name: String,
    pub manifest: Manifest,
    /// Reduced genre per record.
    pub genres: Vec<String>,
    features: Matrix,
}

impl DomainData {
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn split(&self, i: usize) -> Split {
        self.manifest.records()[i].split
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub domains: [DomainData; 2],
    pub classes: Vec<String>,
    pub genre_map: Option<GenreMap>,
}

impl Corpus {
    pub fn dim(&self) -> usize {
        self.domains[0].dim()
    }

    pub fn names(&self) -> [&str; 2] {
        [self.domains[0].name.as_str(), self.domains[1].name.as_str()]
    }
}

fn join(name: &str, table: &EmbeddingTable, manifest: &Manifest, genre_map: Option<&GenreMap>) -> Result<DomainData> {
    let pooled = pool_frames(table)?;
    let manifest = manifest.filter_dataset(name);
    if manifest.is_empty() {
        return Err(Error::validation(format!("manifest has no records for dataset `{name}`")));
    }
    let index = pooled.clip_index();
    let mut rows = Vec::with_capacity(manifest.len());
    for r in manifest.records() {
        let i = *index
            .get(r.clip_id.as_str())
            .ok_or_else(|| Error::validation(format!("clip `{}` of dataset `{name}` has no embedding", r.clip_id)))?;
        rows.push(i);
    }
    let features = select_rows(&pooled.to_matrix(), &rows);
    let empty = GenreMap::default();
    let genres = manifest
        .records()
        .iter()
        .map(|r| reduce_genres(&r.genres, genre_map.unwrap_or(&empty)))
        .collect();
    Ok(DomainData {
        name: name.to_string(),
        manifest,
        genres,
        features,
    })
}

/// Joins two datasets. `classes` empty means every class named by either manifest.
pub fn corpus_from_parts(
    parts: [(&str, &EmbeddingTable, &Manifest); 2],
    genre_map: Option<GenreMap>,
    classes: &[String],
) -> Result<Corpus> {
    let [a, b] = parts;
    let da = join(a.0, a.1, a.2, genre_map.as_ref())?;
    let db = join(b.0, b.1, b.2, genre_map.as_ref())?;
    if da.dim() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: da.dim(),
            found: db.dim(),
        });
    }
    let mut known: Vec<String> = da.manifest.classes().to_vec();
    for c in db.manifest.classes() {
        if !known.contains(c) {
            known.push(c.clone());
        }
    }
    let classes = if classes.is_empty() {
        known
    } else {
        for c in classes {
            if !known.contains(c) {
                return Err(Error::UnknownClass(c.clone()));
            }
        }
        classes.to_vec()
    };
    if classes.is_empty() {
        return Err(Error::validation("no classes to evaluate"));
    }
    Ok(Corpus {
        domains: [da, db],
        classes,
        genre_map,
    })
}

pub fn load_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    config.validate()?;
    config.check_paths()?;
    let genre_map = config.genre_map.as_ref().map(GenreMap::load).transpose()?;
    let mut loaded = Vec::with_capacity(2);
    for d in &config.datasets {
        let table = load_embeddings(&d.embeddings, d.embedding_format())
            .map_err(|e| e.context(format!("loading {}", d.embeddings.display())))?;
        let manifest = load_manifest(&d.manifest).map_err(|e| e.context(format!("loading {}", d.manifest.display())))?;
        loaded.push((d.name.as_str(), table, manifest));
    }
    corpus_from_parts(
        [
            (loaded[0].0, &loaded[0].1, &loaded[0].2),
            (loaded[1].0, &loaded[1].1, &loaded[1].2),
        ],
        genre_map,
        &config.classes,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Anything that shapes a model: sampling, standardizer, gamma, bias fit, CV, training.
    Fit,
    Evaluate,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Fit => "fit",
            Phase::Evaluate => "evaluate",
        })
    }
}

/// Sample reads by phase and split. There is no fit/test counter: such a
/// read is an error under instrumentation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessAudit {
    pub fit_train: usize,
    pub evaluate_train: usize,
    pub evaluate_test: usize,
}

impl AccessAudit {
    pub fn add(&mut self, other: &AccessAudit) {
        self.fit_train += other.fit_train;
        self.evaluate_train += other.evaluate_train;
        self.evaluate_test += other.evaluate_test;
    }
}

/// Gatekeeper for feature reads. With instrumentation on, every row read is
/// tagged with its split and a test-split read in the fit phase is an error.
pub struct Access<'c> {
    corpus: &'c Corpus,
    instrument: bool,
    audit: AccessAudit,
    log: BTreeMap<String, AccessAudit>,
    label: String,
}

impl<'c> Access<'c> {
    pub fn new(corpus: &'c Corpus, instrument: bool) -> Self {
        Access {
            corpus,
            instrument,
            audit: AccessAudit::default(),
            log: BTreeMap::new(),
            label: String::new(),
        }
    }

    pub fn corpus(&self) -> &'c Corpus {
        self.corpus
    }

    /// Name under which subsequent reads are tallied.
    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn audit(&self) -> &AccessAudit {
        &self.audit
    }

    pub fn into_log(self) -> BTreeMap<String, AccessAudit> {
        self.log
    }

    pub fn rows(&mut self, domain: usize, idx: &[usize], phase: Phase) -> Result<Matrix> {
        let d = &self.corpus.domains[domain];
        if self.instrument {
            let mut tally = AccessAudit::default();
            for &i in idx {
                match (phase, d.split(i)) {
                    (Phase::Fit, Split::Train) => tally.fit_train += 1,
                    (Phase::Fit, Split::Test) => {
                        return Err(Error::Leakage {
                            clip_id: format!("{}/{}", d.name, d.manifest.records()[i].clip_id),
                            phase: phase.to_string(),
                        })
                    }
                    (Phase::Evaluate, Split::Train) => tally.evaluate_train += 1,
                    (Phase::Evaluate, Split::Test) => tally.evaluate_test += 1,
                }
            }
            self.audit.add(&tally);
            self.log.entry(self.label.clone()).or_default().add(&tally);
        }
        Ok(select_rows(&d.features, idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClipRecord, EmbeddingRow, LabelState};

    fn domain(name: &str) -> (EmbeddingTable, Manifest) {
        let rows = (0..4)
            .map(|i| EmbeddingRow {
                clip_id: format!("{name}{i}"),
                frame_index: 0,
                vector: vec![i as f64, 1.0],
            })
            .collect();
        let records = (0..4)
            .map(|i| ClipRecord {
                clip_id: format!("{name}{i}"),
                dataset: name.into(),
                split: if i < 3 { Split::Train } else { Split::Test },
                genres: vec![],
                labels: BTreeMap::from([("k".to_string(), LabelState::Positive)]),
            })
            .collect();
        (EmbeddingTable::new(2, rows).unwrap(), Manifest::new(records).unwrap())
    }

    #[test]
    fn test_read_during_fit_is_caught() {
        let (ta, ma) = domain("a");
        let (tb, mb) = domain("b");
        let c = corpus_from_parts([("a", &ta, &ma), ("b", &tb, &mb)], None, &[]).unwrap();
        let mut acc = Access::new(&c, true);
        assert_eq!(acc.rows(0, &[0, 1], Phase::Fit).unwrap().nrows(), 2);
        match acc.rows(1, &[3], Phase::Fit) {
            Err(Error::Leakage { clip_id, phase }) => {
                assert_eq!(clip_id, "b/b3");
                assert_eq!(phase, "fit");
            }
            other => panic!("unexpected {other:?}"),
        }
        acc.rows(1, &[3], Phase::Evaluate).unwrap();
        assert_eq!(
            acc.audit(),
            &AccessAudit {
                fit_train: 2,
                evaluate_train: 0,
                evaluate_test: 1
            }
        );
    }

    #[test]
    fn missing_embedding() {
        let (ta, mut ma) = domain("a");
        let (tb, mb) = domain("b");
        let mut recs = ma.records().to_vec();
        recs[0].clip_id = "zzz".into();
        ma = Manifest::new(recs).unwrap();
        assert!(corpus_from_parts([("a", &ta, &ma), ("b", &tb, &mb)], None, &[]).is_err());
    }

    #[test]
    fn unknown_class() {
        let (ta, ma) = domain("a");
        let (tb, mb) = domain("b");
        let r = corpus_from_parts([("a", &ta, &ma), ("b", &tb, &mb)], None, &["piano".to_string()]);
        assert!(matches!(r, Err(Error::UnknownClass(_))));
    }
}
