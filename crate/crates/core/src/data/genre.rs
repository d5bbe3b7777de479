use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Sentinel genre for records without any genre label.
pub const UNKNOWN_GENRE: &str = "unknown";

/// Canonical genre targets plus rules mapping source genre strings onto them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenreMap {
    pub targets: Vec<String>,
    #[serde(deserialize_with = "unique_rules")]
    pub rules: BTreeMap<String, String>,
}

fn unique_rules<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, String>, D::Error> {
    struct RulesVisitor;

    impl<'de> Visitor<'de> for RulesVisitor {
        type Value = BTreeMap<String, String>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an object of source genre -> target genre")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((k, v)) = map.next_entry::<String, String>()? {
                if out.contains_key(&k) {
                    return Err(serde::de::Error::custom(format!("duplicate rule key `{k}`")));
                }
                out.insert(k, v);
            }
            Ok(out)
        }
    }

    d.deserialize_map(RulesVisitor)
}

impl GenreMap {
    pub fn new(targets: Vec<String>, rules: BTreeMap<String, String>) -> Result<Self> {
        let m = GenreMap { targets, rules };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (src, dst) in &self.rules {
            if !self.targets.contains(dst) {
                return Err(Error::validation(format!(
                    "genre rule `{src}` -> `{dst}` targets an undeclared genre"
                )));
            }
        }
        Ok(())
    }

    /// Canonical target for a single source label. A label that already
    /// names a target maps to itself.
    pub fn canonical(&self, genre: &str) -> Option<&str> {
        if let Some(t) = self.targets.iter().find(|t| t.as_str() == genre) {
            return Some(t.as_str());
        }
        self.rules.get(genre).map(String::as_str)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let m: GenreMap = serde_json::from_reader(BufReader::new(f))?;
        m.validate()?;
        Ok(m)
    }
}

/// Reduces a multi-genre annotation to one label: the canonical target of
/// the first label that maps to a target, else the first label verbatim,
/// else [`UNKNOWN_GENRE`].
pub fn reduce_genres<S: AsRef<str>>(genres: &[S], map: &GenreMap) -> String {
    genres
        .iter()
        .find_map(|g| map.canonical(g.as_ref()))
        .map(str::to_string)
        .or_else(|| genres.first().map(|g| g.as_ref().to_string()))
        .unwrap_or_else(|| UNKNOWN_GENRE.to_string())
}
