//! Frames, clips and the on-disk formats the rest of the crate reads and writes.

mod cube;
mod frame;
mod manifest;
mod ppm;
mod scores;

use std::path::{Path, PathBuf};

pub use cube::{format_cube, parse_cube, read_lut_cube, write_lut_cube};
pub use frame::{Clip, Frame};
pub use manifest::{read_manifest, write_manifest, LoadedManifest, Manifest, ManifestEntry, Role};
pub use ppm::{
    decode_ppm, encode_ppm, frame_file_name, list_frames, quantize, read_clip, read_frame, write_clip,
    write_frame,
};
pub use scores::{read_scores, write_scores, ClipScores, ScoreFile, AUX_SCORES};

#[derive(Debug, thiserror::Error)]
pub enum MediaError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing directory {0}")]
    MissingDirectory(PathBuf),
    #[error("index gap at {0}")]
    IndexGap(usize),
    #[error("malformed raster header: {0}")]
    MalformedHeader(String),
    #[error("pixel value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("cube file: {0}")]
    Cube(String),
    #[error("scores: {0}")]
    Scores(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {inner}")]
    InFile { path: PathBuf, inner: Box<MediaError> },
}

impl MediaError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MediaError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn context(self, path: &Path) -> Self {
        match self {
            e @ (MediaError::Io { .. } | MediaError::InFile { .. }) => e,
            e => MediaError::InFile {
                path: path.to_path_buf(),
                inner: Box::new(e),
            },
        }
    }
}
