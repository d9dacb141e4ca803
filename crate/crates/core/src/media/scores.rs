//! Externally computed quality scores: one preference probability and eleven
//! auxiliary scores per clip.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MediaError;

pub const AUX_SCORES: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipScores {
    pub p: f64,
    pub aux: Vec<f64>,
}

impl ClipScores {
    fn validate(&self, clip_id: &str) -> Result<(), MediaError> {
        if self.aux.len() != AUX_SCORES {
            return Err(MediaError::Scores(format!(
                "clip {clip_id}: expected {AUX_SCORES} aux scores, found {}",
                self.aux.len()
            )));
        }
        for v in std::iter::once(&self.p).chain(&self.aux) {
            if !(0.0..=1.0).contains(v) {
                return Err(MediaError::Scores(format!("clip {clip_id}: value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `p` followed by the aux scores.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.p).chain(self.aux.iter().copied())
    }
}

/// Validated map of clip id to scores, serialized as a plain JSON object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, ClipScores>", into = "BTreeMap<String, ClipScores>")]
pub struct ScoreFile {
    clips: BTreeMap<String, ClipScores>,
}

impl TryFrom<BTreeMap<String, ClipScores>> for ScoreFile {
    type Error = MediaError;

    fn try_from(clips: BTreeMap<String, ClipScores>) -> Result<Self, MediaError> {
        for (id, s) in &clips {
            s.validate(id)?;
        }
        Ok(Self { clips })
    }
}

impl From<ScoreFile> for BTreeMap<String, ClipScores> {
    fn from(s: ScoreFile) -> Self {
        s.clips
    }
}

impl ScoreFile {
    pub fn new(clips: BTreeMap<String, ClipScores>) -> Result<Self, MediaError> {
        Self::try_from(clips)
    }

    pub fn get(&self, clip_id: &str) -> Option<&ClipScores> {
        self.clips.get(clip_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ClipScores)> {
        self.clips.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, MediaError> {
        serde_json::from_str(text).map_err(|e| MediaError::Scores(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score maps serialize")
    }
}

pub fn read_scores(path: &Path) -> Result<ScoreFile, MediaError> {
    let text = fs::read_to_string(path).map_err(|e| MediaError::io(path, e))?;
    ScoreFile::parse(&text).map_err(|e| e.context(path))
}

pub fn write_scores(scores: &ScoreFile, path: &Path) -> Result<(), MediaError> {
    fs::write(path, scores.to_json()).map_err(|e| MediaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_uniform_scores() {
        let s = ScoreFile::parse(r#"{"v1": {"p": 0.5, "aux": [0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]}}"#).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.get("v1").unwrap().values().count(), 12);
    }

    #[test]
    fn short_aux_rejected() {
        let err = ScoreFile::parse(r#"{"v1": {"p": 0.5, "aux": [0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("expected 11 aux"), "{err}");
    }

    #[test]
    fn probability_above_one_rejected() {
        let err = ScoreFile::parse(r#"{"v1": {"p": 1.3, "aux": [0,0,0,0,0,0,0,0,0,0,0]}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("outside [0, 1]"), "{err}");
    }
}
