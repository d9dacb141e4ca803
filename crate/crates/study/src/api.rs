use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use vqe_core::media::list_frames;

use crate::study::{PairAssignment, Study, VoteSubmission};
use crate::{StudyConfig, StudyError};

pub struct AppState {
    pub study: Mutex<Study>,
    roots: BTreeMap<String, PathBuf>,
    fps: f64,
}

impl AppState {
    pub fn open(config: &StudyConfig) -> Result<Arc<Self>, StudyError> {
        let study = Study::open(config)?;
        let roots = config.conditions().iter().map(|c| (c.method_id.clone(), c.root.clone())).collect();
        Ok(Arc::new(Self { study: Mutex::new(study), roots, fps: config.fps }))
    }

    fn study(&self) -> std::sync::MutexGuard<'_, Study> {
        // A panic mid-request leaves counters consistent with the logs, which
        // are only appended after validation.
        self.study.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

fn error_response(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(ErrorBody { code: code.into(), message })).into_response()
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            StudyError::Exhausted(_) => (StatusCode::GONE, "exhausted"),
            StudyError::UnknownPair(_) => (StatusCode::NOT_FOUND, "unknown_pair"),
            StudyError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            StudyError::Duplicate { .. } => (StatusCode::CONFLICT, "duplicate_vote"),
            StudyError::NotAssigned { .. } => (StatusCode::CONFLICT, "not_assigned"),
            StudyError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            StudyError::Config(_) | StudyError::Io { .. } | StudyError::Log(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        error_response(status, code, self.to_string())
    }
}

/// Frame list for one side of a pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MediaRef {
    pub base: String,
    pub fps: f64,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairResponse {
    #[serde(flatten)]
    pub assignment: PairAssignment,
    pub left: MediaRef,
    pub right: MediaRef,
}

#[derive(Debug, Deserialize)]
struct RaterQuery {
    rater_id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VoteAck {
    pub vote_id: String,
    pub completed_count: u64,
}

pub fn router(state: Arc<AppState>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/pair", get(next_pair))
        .route("/api/vote", post(submit_vote))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/media/{clip_id}/{method_id}", get(media_index))
        .route("/media/{clip_id}/{method_id}/", get(media_index))
        .route("/media/{clip_id}/{method_id}/{*file}", get(media_file))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

async fn placeholder() -> Html<&'static str> {
    Html("<!doctype html><title>study</title><p>No rater bundle configured. The JSON API is under /api/.</p>")
}

fn media_ref(state: &AppState, clip_id: &str, method: &str) -> Result<MediaRef, StudyError> {
    let dir = clip_dir(state, clip_id, method)?;
    let frames = list_frames(&dir)
        .map_err(|e| StudyError::NotFound(e.to_string()))?
        .iter()
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
        .collect();
    Ok(MediaRef { base: format!("/media/{clip_id}/{method}/"), fps: state.fps, frames })
}

fn clip_dir(state: &AppState, clip_id: &str, method: &str) -> Result<PathBuf, StudyError> {
    let root = state.roots.get(method).ok_or_else(|| StudyError::NotFound(format!("condition {method}")))?;
    if !crate::config::valid_id(clip_id) {
        return Err(StudyError::NotFound(format!("clip {clip_id}")));
    }
    Ok(root.join(clip_id))
}

async fn next_pair(State(state): State<Arc<AppState>>, Query(q): Query<RaterQuery>) -> Result<Json<PairResponse>, StudyError> {
    let rater = q.rater_id.ok_or_else(|| StudyError::Validation("rater_id query parameter is required".into()))?;
    let assignment = state.study().next_pair(&rater)?;
    let left = media_ref(&state, &assignment.clip_id, &assignment.left_method)?;
    let right = media_ref(&state, &assignment.clip_id, &assignment.right_method)?;
    Ok(Json(PairResponse { assignment, left, right }))
}

async fn submit_vote(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, StudyError> {
    let sub: VoteSubmission = serde_json::from_slice(&body).map_err(|e| StudyError::Validation(e.to_string()))?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let mut study = state.study();
    let record = study.submit(sub, now)?;
    let completed = study
        .progress()
        .pairs
        .iter()
        .find(|p| p.pair_id == record.pair_id)
        .map_or(0, |p| p.completed);
    Ok((StatusCode::CREATED, Json(VoteAck { vote_id: record.vote_id, completed_count: completed })).into_response())
}

async fn progress(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(state.study().progress())
}

async fn export(State(state): State<Arc<AppState>>) -> Result<Response, StudyError> {
    let bytes = state.study().export()?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn media_index(State(state): State<Arc<AppState>>, UrlPath((clip_id, method_id)): UrlPath<(String, String)>) -> Result<Json<MediaRef>, StudyError> {
    Ok(Json(media_ref(&state, &clip_id, &method_id)?))
}

async fn media_file(
    State(state): State<Arc<AppState>>,
    UrlPath((clip_id, method_id, file)): UrlPath<(String, String, String)>,
) -> Result<Response, StudyError> {
    let dir = clip_dir(&state, &clip_id, &method_id)?;
    let rel = Path::new(&file);
    if file.is_empty() || !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(StudyError::NotFound(file));
    }
    let path = dir.join(rel);
    let bytes = tokio::fs::read(&path).await.map_err(|_| StudyError::NotFound(file.clone()))?;
    let mime = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => "image/x-portable-pixmap",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("mp4") => "video/mp4",
        Some("webm") => "video/webm",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}
