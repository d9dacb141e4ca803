//! Local side-by-side preference study: schedules counterbalanced pairs,
//! serves frame sequences, and keeps an append-only vote log that feeds
//! Bradley–Terry ranking.

mod api;
mod config;
mod study;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use api::{router, AppState, ErrorBody, MediaRef, PairResponse, VoteAck};
pub use config::{MethodSource, StudyConfig};
pub use study::{PairAssignment, PairProgress, Progress, Study, VoteSubmission, SERVES_FILE, VOTES_FILE};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("no pairs left for rater {0}")]
    Exhausted(String),
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rater {rater_id} already voted on {pair_id}")]
    Duplicate { rater_id: String, pair_id: String },
    #[error("pair {pair_id} is not assigned to rater {rater_id}")]
    NotAssigned { rater_id: String, pair_id: String },
    #[error("{0}")]
    Validation(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("log: {0}")]
    Log(String),
}

impl StudyError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StudyError::Io { path: path.to_path_buf(), source }
    }
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: StudyConfig) -> Result<(), StudyError> {
    let state = AppState::open(&config)?;
    let app = router(state, config.static_dir.as_deref());
    let addr = format!("{}:{}", config.bind, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| StudyError::io(Path::new(&addr), e))?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| StudyError::io(Path::new(&addr), e))
}
