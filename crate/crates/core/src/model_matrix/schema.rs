use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which blocks are scaled to unit variance after centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "ScaleSetting")]
pub struct ScaleFlags {
    pub predictors: bool,
    pub sensitive: bool,
}

/// Accepts either `scale = true` or `scale = { predictors = .., sensitive = .. }`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScaleSetting {
    All(bool),
    Blocks {
        #[serde(default)]
        predictors: bool,
        #[serde(default)]
        sensitive: bool,
    },
}

impl From<ScaleSetting> for ScaleFlags {
    fn from(s: ScaleSetting) -> Self {
        match s {
            ScaleSetting::All(b) => ScaleFlags {
                predictors: b,
                sensitive: b,
            },
            ScaleSetting::Blocks {
                predictors,
                sensitive,
            } => ScaleFlags {
                predictors,
                sensitive,
            },
        }
    }
}

/// Partition of the data columns into response, predictors and sensitive attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub response: String,
    pub sensitive: Vec<String>,
    /// `None` means every column that is neither the response nor sensitive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictors: Option<Vec<String>>,
    #[serde(default)]
    pub scale: ScaleFlags,
}

/// A schema checked against a concrete header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSchema {
    pub response: String,
    pub sensitive: Vec<String>,
    pub predictors: Vec<String>,
}

impl ResolvedSchema {
    pub fn referenced(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.response)
            .chain(self.predictors.iter())
            .chain(self.sensitive.iter())
    }
}

impl Schema {
    pub fn new(response: &str, sensitive: &[&str], predictors: Option<&[&str]>) -> Self {
        Schema {
            response: response.to_string(),
            sensitive: sensitive.iter().map(|s| s.to_string()).collect(),
            predictors: predictors.map(|p| p.iter().map(|s| s.to_string()).collect()),
            scale: ScaleFlags::default(),
        }
    }

    /// Reads a schema from TOML (`.toml`) or JSON (anything else).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_toml = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("toml"))
            .unwrap_or(false);
        if is_toml {
            toml::from_str(&text).map_err(|e| Error::Schema(e.to_string()))
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema is always serializable")
    }

    /// Checks the schema invariants against `header` and fills in default predictors.
    pub fn resolve(&self, header: &[String]) -> Result<ResolvedSchema> {
        let present: HashSet<&str> = header.iter().map(String::as_str).collect();
        if self.sensitive.is_empty() {
            return Err(Error::Schema("at least one sensitive column is required".into()));
        }
        let mut seen = HashSet::new();
        let predictors: Vec<String> = match &self.predictors {
            Some(p) => p.clone(),
            None => header
                .iter()
                .filter(|h| **h != self.response && !self.sensitive.contains(h))
                .cloned()
                .collect(),
        };
        for name in std::iter::once(&self.response)
            .chain(self.sensitive.iter())
            .chain(predictors.iter())
        {
            if !present.contains(name.as_str()) {
                return Err(Error::MissingColumn(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!(
                    "column `{name}` is used more than once across response, sensitive and predictors"
                )));
            }
        }
        if predictors.is_empty() {
            return Err(Error::Schema("at least one predictor column is required".into()));
        }
        Ok(ResolvedSchema {
            response: self.response.clone(),
            sensitive: self.sensitive.clone(),
            predictors,
        })
    }
}
