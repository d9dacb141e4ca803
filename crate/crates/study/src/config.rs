use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::StudyError;

/// One condition shown to raters: clips live under `root/{clip_id}/` as
/// numbered frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSource {
    pub method_id: String,
    pub root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub methods: Vec<MethodSource>,
    /// The unprocessed input, compared like any other condition.
    #[serde(default)]
    pub input: Option<MethodSource>,
    #[serde(default)]
    pub baseline: Option<MethodSource>,
    /// Clip ids to study; empty means every clip present under all roots.
    #[serde(default)]
    pub clips: Vec<String>,
    #[serde(default = "default_votes")]
    pub votes_per_pair: u32,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub data_dir: PathBuf,
    /// Directory served at `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_votes() -> u32 {
    5
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_fps() -> f64 {
    30.0
}

impl StudyConfig {
    pub fn new(methods: Vec<MethodSource>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            methods,
            input: None,
            baseline: None,
            clips: Vec::new(),
            votes_per_pair: default_votes(),
            bind: default_bind(),
            port: default_port(),
            data_dir: data_dir.into(),
            static_dir: None,
            fps: default_fps(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, StudyError> {
        let c: Self = serde_json::from_str(text).map_err(|e| StudyError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self, StudyError> {
        let text = fs::read_to_string(path).map_err(|e| StudyError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Input, baseline, then the methods, in that order.
    pub fn conditions(&self) -> Vec<&MethodSource> {
        self.input.iter().chain(self.baseline.iter()).chain(self.methods.iter()).collect()
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let conds = self.conditions();
        if conds.len() < 2 {
            return Err(StudyError::Config("a study needs at least two conditions".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &conds {
            if !valid_id(&c.method_id) {
                return Err(StudyError::Config(format!("bad condition id {:?}", c.method_id)));
            }
            if !seen.insert(c.method_id.as_str()) {
                return Err(StudyError::Config(format!("duplicate condition {}", c.method_id)));
            }
        }
        for id in &self.clips {
            if !valid_id(id) {
                return Err(StudyError::Config(format!("bad clip id {id:?}")));
            }
        }
        if self.votes_per_pair == 0 {
            return Err(StudyError::Config("votes_per_pair must be at least 1".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(StudyError::Config(format!("fps {} must be positive", self.fps)));
        }
        Ok(())
    }

    /// The configured clips, or the clip directories common to every root.
    pub fn clip_ids(&self) -> Result<Vec<String>, StudyError> {
        if !self.clips.is_empty() {
            return Ok(self.clips.clone());
        }
        let mut common: Option<BTreeSet<String>> = None;
        for c in self.conditions() {
            let mut here = BTreeSet::new();
            let entries = fs::read_dir(&c.root).map_err(|e| StudyError::io(&c.root, e))?;
            for e in entries {
                let e = e.map_err(|err| StudyError::io(&c.root, err))?;
                if e.path().is_dir() {
                    if let Some(name) = e.file_name().to_str().filter(|n| valid_id(n)) {
                        here.insert(name.to_string());
                    }
                }
            }
            common = Some(match common {
                None => here,
                Some(prev) => prev.intersection(&here).cloned().collect(),
            });
        }
        let clips: Vec<String> = common.unwrap_or_default().into_iter().collect();
        if clips.is_empty() {
            return Err(StudyError::Config("no clip directory is present under every condition root".into()));
        }
        Ok(clips)
    }
}

/// Ids become path segments and `:`-joined pair ids.
pub(crate) fn valid_id(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}
