//! Dataset manifests: a JSON array of clip entries.
//!
//! ```json
//! [
//!   {"clip_id": "a_in", "role": "input", "path": "a/in", "fps": 19.0, "pair": "a_gt"},
//!   {"clip_id": "a_gt", "role": "target", "path": "a/gt", "fps": 19.0}
//! ]
//! ```
//!
//! `pair` links an input or prediction clip to its target. Relative paths are
//! resolved against the manifest file's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_clip, Clip, MediaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Input,
    Target,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub role: Role,
    pub path: PathBuf,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ManifestEntry>", into = "Vec<ManifestEntry>")]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl TryFrom<Vec<ManifestEntry>> for Manifest {
    type Error = MediaError;

    fn try_from(entries: Vec<ManifestEntry>) -> Result<Self, MediaError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.clip_id.as_str()) {
                return Err(MediaError::Manifest(format!("duplicate clip_id {:?}", e.clip_id)));
            }
            if !(e.fps > 0.0) {
                return Err(MediaError::Manifest(format!("clip {:?}: fps must be positive", e.clip_id)));
            }
        }
        for e in &entries {
            if let Some(p) = &e.pair {
                if !seen.contains(p.as_str()) {
                    return Err(MediaError::Manifest(format!(
                        "clip {:?} is paired with unknown clip {p:?}",
                        e.clip_id
                    )));
                }
            }
        }
        Ok(Self { entries })
    }
}

impl From<Manifest> for Vec<ManifestEntry> {
    fn from(m: Manifest) -> Self {
        m.entries
    }
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, MediaError> {
        Self::try_from(entries)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn get(&self, clip_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.clip_id == clip_id)
    }

    /// `(source, target)` entries for every paired source with the given role.
    pub fn pairs(&self, role: Role) -> Vec<(&ManifestEntry, &ManifestEntry)> {
        let by_id: BTreeMap<&str, &ManifestEntry> =
            self.entries.iter().map(|e| (e.clip_id.as_str(), e)).collect();
        self.entries
            .iter()
            .filter(|e| e.role == role)
            .filter_map(|e| e.pair.as_deref().and_then(|p| by_id.get(p)).map(|t| (e, *t)))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, MediaError> {
        serde_json::from_str(text).map_err(|e| MediaError::Manifest(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifests serialize")
    }
}

/// A manifest together with the directory its relative paths are anchored to.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub root: PathBuf,
}

impl LoadedManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn load_clip(&self, entry: &ManifestEntry) -> Result<Clip, MediaError> {
        let clip = read_clip(&self.resolve(entry), entry.fps)?;
        Clip::new(entry.clip_id.clone(), entry.fps, clip.into_frames())
    }

    /// Loads every `(source, target)` clip pair for sources with `role`.
    pub fn load_pairs(&self, role: Role) -> Result<Vec<(Clip, Clip)>, MediaError> {
        self.manifest
            .pairs(role)
            .into_iter()
            .map(|(s, t)| Ok((self.load_clip(s)?, self.load_clip(t)?)))
            .collect()
    }
}

pub fn read_manifest(path: &Path) -> Result<LoadedManifest, MediaError> {
    let text = fs::read_to_string(path).map_err(|e| MediaError::io(path, e))?;
    let manifest = Manifest::parse(&text).map_err(|e| e.context(path))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedManifest { manifest, root })
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), MediaError> {
    fs::write(path, manifest.to_json()).map_err(|e| MediaError::io(path, e))
}
