//! Per-clip metadata in JSON Lines form:
//!
//! ```json
//! {"clip_id":"a","dataset":"A","split":"train","genres":["Rock"],"labels":{"organ":"pos"}}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelState {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
    #[serde(rename = "unk")]
    Unknown,
}

impl LabelState {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "pos" => Some(LabelState::Positive),
            "neg" => Some(LabelState::Negative),
            "unk" => Some(LabelState::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelState::Positive => "pos",
            LabelState::Negative => "neg",
            LabelState::Unknown => "unk",
        }
    }

    /// `Some(true)` for positive, `Some(false)` for negative, `None` for unknown.
    pub fn as_binary(self) -> Option<bool> {
        match self {
            LabelState::Positive => Some(true),
            LabelState::Negative => Some(false),
            LabelState::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub dataset: String,
    pub split: Split,
    pub genres: Vec<String>,
    pub labels: BTreeMap<String, LabelState>,
}

impl ClipRecord {
    pub fn label(&self, class: &str) -> LabelState {
        self.labels.get(class).copied().unwrap_or(LabelState::Unknown)
    }
}

/// Raw line shape; split and label tokens are checked by hand so that a bad
/// token is reported as a validation error with its line number.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    clip_id: String,
    dataset: String,
    split: String,
    genres: Vec<String>,
    labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    records: Vec<ClipRecord>,
    classes: Vec<String>,
}

impl Manifest {
    /// Validates uniqueness of `(dataset, clip_id)` and fills every class key
    /// seen anywhere with `Unknown` where absent.
    pub fn new(records: Vec<ClipRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut classes: Vec<String> = Vec::new();
        let mut class_set = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert((r.dataset.as_str(), r.clip_id.as_str())) {
                return Err(Error::Validation {
                    line: Some(i + 1),
                    message: format!("duplicate clip_id `{}` in dataset `{}`", r.clip_id, r.dataset),
                });
            }
            for k in r.labels.keys() {
                if class_set.insert(k.clone()) {
                    classes.push(k.clone());
                }
            }
        }
        let mut m = Manifest { records, classes };
        m.fill_unknown();
        Ok(m)
    }

    fn fill_unknown(&mut self) {
        for r in &mut self.records {
            for c in &self.classes {
                r.labels.entry(c.clone()).or_insert(LabelState::Unknown);
            }
        }
    }

    /// Adds class names that no record mentions (all `Unknown`).
    pub fn with_classes<S: AsRef<str>>(mut self, classes: &[S]) -> Self {
        for c in classes {
            if !self.classes.iter().any(|k| k == c.as_ref()) {
                self.classes.push(c.as_ref().to_string());
            }
        }
        self.fill_unknown();
        self
    }

    pub fn records(&self) -> &[ClipRecord] {
        &self.records
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.dataset) {
                out.push(r.dataset.clone());
            }
        }
        out
    }

    /// Records belonging to one dataset, keeping the full class list.
    pub fn filter_dataset(&self, dataset: &str) -> Manifest {
        Manifest {
            records: self
                .records
                .iter()
                .filter(|r| r.dataset == dataset)
                .cloned()
                .collect(),
            classes: self.classes.clone(),
        }
    }

    /// Concatenates manifests (e.g. one per dataset) and revalidates.
    pub fn merge(parts: &[Manifest]) -> Result<Manifest> {
        let records = parts.iter().flat_map(|m| m.records.iter().cloned()).collect();
        let mut classes: Vec<String> = Vec::new();
        for m in parts {
            for c in &m.classes {
                if !classes.contains(c) {
                    classes.push(c.clone());
                }
            }
        }
        Ok(Manifest::new(records)?.with_classes(&classes))
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn parse_manifest<R: BufRead>(reader: R) -> Result<Manifest> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let split = match raw.split.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Validation {
                    line: Some(lineno),
                    message: format!("split must be `train` or `test`, got `{other}`"),
                })
            }
        };
        let mut labels = BTreeMap::new();
        for (class, token) in raw.labels {
            let state = LabelState::parse(&token).ok_or_else(|| Error::Validation {
                line: Some(lineno),
                message: format!("label for `{class}` must be pos/neg/unk, got `{token}`"),
            })?;
            labels.insert(class, state);
        }
        if !seen.insert((raw.dataset.clone(), raw.clip_id.clone())) {
            return Err(Error::Validation {
                line: Some(lineno),
                message: format!("duplicate clip_id `{}` in dataset `{}`", raw.clip_id, raw.dataset),
            });
        }
        records.push(ClipRecord {
            clip_id: raw.clip_id,
            dataset: raw.dataset,
            split,
            genres: raw.genres,
            labels,
        });
    }
    Manifest::new(records)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record_fills_unknown() {
        let text = concat!(
            r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{"organ":"pos"}}"#,
            "\n",
            r#"{"clip_id":"b","dataset":"A","split":"test","genres":["Jazz"],"labels":{"piano":"neg"}}"#,
        );
        let m = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.records()[0].label("organ"), LabelState::Positive);
        assert_eq!(m.records()[0].label("piano"), LabelState::Unknown);
        assert_eq!(m.records()[1].labels["organ"], LabelState::Unknown);
    }

    #[test]
    fn one_line_schema_case() {
        let text = r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{"organ":"pos"}}"#;
        let m = parse_manifest(text.as_bytes()).unwrap().with_classes(&["organ", "voice"]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.records()[0].labels["organ"], LabelState::Positive);
        assert_eq!(m.records()[0].labels["voice"], LabelState::Unknown);
    }

    #[test]
    fn duplicate_clip_in_dataset() {
        let line = r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{}}"#;
        let text = format!("{line}\n{line}\n");
        match parse_manifest(text.as_bytes()) {
            Err(Error::Validation { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_clip_other_dataset_is_fine() {
        let text = concat!(
            r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{}}"#,
            "\n",
            r#"{"clip_id":"a","dataset":"B","split":"train","genres":[],"labels":{}}"#,
        );
        assert_eq!(parse_manifest(text.as_bytes()).unwrap().len(), 2);
    }

    #[test]
    fn validation_split_names_line() {
        let text = concat!(
            r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{}}"#,
            "\n",
            r#"{"clip_id":"b","dataset":"A","split":"validation","genres":[],"labels":{}}"#,
        );
        let err = parse_manifest(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation { line: Some(2), .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        let text = "{\"clip_id\": \n";
        assert!(matches!(parse_manifest(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_field_rejected() {
        let text = r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{},"extra":1}"#;
        assert!(matches!(parse_manifest(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn bad_label_token() {
        let text = r#"{"clip_id":"a","dataset":"A","split":"train","genres":[],"labels":{"x":"yes"}}"#;
        assert!(matches!(parse_manifest(text.as_bytes()), Err(Error::Validation { line: Some(1), .. })));
    }
}
