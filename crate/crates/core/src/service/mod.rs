//! HTTP+JSON service over explanation sessions, persisted one directory per
//! session.
//!
//! Routes:
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | [`CreateSession`] |
//! | GET | `/sessions/{id}` | |
//! | PUT | `/sessions/{id}/segmentation` | [`MergeRequest`] |
//! | POST | `/sessions/{id}/fit` | [`FitRequest`] |
//! | POST | `/sessions/{id}/query` | [`QueryRequest`] |
//! | GET | `/sessions/{id}/render/{bits}.png` | |
//! | GET | `/sessions/{id}/tree?variant=` | |
//!
//! Errors are `{"error": {"code", "message"}}` with status 400 (bad input),
//! 404 (unknown session), 409 (busy or not fitted) or 502 (black box
//! unreachable or misbehaving).

pub mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, TryLockError};

use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Variant;

pub use session::{
    run_fit, CreateSession, FitOutcome, FitRequest, InstanceSource, QueryRequest,
    SegmentationSource, Session, SessionSummary,
};

pub type SharedSession = Arc<RwLock<Session>>;

/// Sessions in memory, mirrored under `root/<id>/`.
pub struct SessionStore {
    root: PathBuf,
    sessions: RwLock<HashMap<String, SharedSession>>,
}

impl SessionStore {
    /// Opens `root`, loading every session directory found there.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&root)? {
            let path = entry?.path();
            if path.join("session.json").is_file() {
                let s = Session::load(&path)?;
                sessions.insert(s.id().to_owned(), Arc::new(RwLock::new(s)));
            }
        }
        Ok(Self {
            root,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, req: CreateSession) -> Result<SessionSummary> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::create(id.clone(), req)?;
        session.save(&self.root.join(&id))?;
        let summary = session.summary();
        self.sessions
            .write()
            .expect("store lock")
            .insert(id, Arc::new(RwLock::new(session)));
        Ok(summary)
    }

    pub fn get(&self, id: &str) -> Result<SharedSession> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    /// Runs `f` with exclusive access, failing fast if the session is busy,
    /// then persists the session.
    pub fn write<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let shared = self.get(id)?;
        let mut guard = match shared.try_write() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => {
                return Err(Error::Conflict(format!("session {id} is busy")))
            }
            Err(TryLockError::Poisoned(_)) => {
                return Err(Error::Conflict(format!("session {id} is unusable after a crash")))
            }
        };
        let out = f(&mut guard)?;
        guard.save(&self.root.join(id))?;
        Ok(out)
    }

    /// Runs `f` with shared access.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> Result<T>) -> Result<T> {
        let shared = self.get(id)?;
        let guard = shared
            .read()
            .map_err(|_| Error::Conflict(format!("session {id} is unusable after a crash")))?;
        f(&guard)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRequest {
    pub groups: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct TreeParams {
    #[serde(default)]
    pub variant: Option<Variant>,
}

#[derive(Serialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Serialize)]
struct ErrorDetail {
    code: &'static str,
    message: String,
}

/// Error carried to an HTTP response.
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_and_code(e: &Error) -> (StatusCode, &'static str) {
    match e {
        Error::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid-argument"),
        Error::UnsupportedInstance(_) => (StatusCode::BAD_REQUEST, "unsupported-instance"),
        Error::Capacity { .. } => (StatusCode::BAD_REQUEST, "capacity"),
        Error::Media(_) => (StatusCode::BAD_REQUEST, "media"),
        Error::Json(_) => (StatusCode::BAD_REQUEST, "json"),
        Error::DegenerateFit(_) => (StatusCode::BAD_REQUEST, "degenerate-fit"),
        Error::NotFound(_) => (StatusCode::NOT_FOUND, "not-found"),
        Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
        Error::Transport { .. } => (StatusCode::BAD_GATEWAY, "transport"),
        Error::Protocol(_) => (StatusCode::BAD_GATEWAY, "protocol"),
        Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = status_and_code(&self.0);
        let body = ErrorBody {
            error: ErrorDetail {
                code,
                message: self.0.to_string(),
            },
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Conflict(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

type AppState = Arc<SessionStore>;

async fn create_session(
    State(store): State<AppState>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionSummary>)> {
    let summary = blocking(move || store.create(req)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_session(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SessionSummary>> {
    Ok(Json(blocking(move || store.read(&id, |s| Ok(s.summary()))).await?))
}

async fn update_segmentation(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<MergeRequest>,
) -> ApiResult<Json<session::MergeOutcome>> {
    Ok(Json(
        blocking(move || store.write(&id, |s| s.merge(&req.groups))).await?,
    ))
}

async fn fit(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<FitRequest>,
) -> ApiResult<Json<FitOutcome>> {
    Ok(Json(blocking(move || store.write(&id, |s| s.fit(req))).await?))
}

async fn query(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<QueryRequest>,
) -> ApiResult<Json<crate::explain::ExplanationResult>> {
    Ok(Json(blocking(move || store.read(&id, |s| s.query(&req))).await?))
}

async fn render(
    State(store): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let bits = file
        .strip_suffix(".png")
        .ok_or_else(|| Error::invalid("render paths end in .png"))?
        .to_owned();
    let (content_type, bytes) = blocking(move || store.read(&id, |s| s.render(&bits))).await?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes.as_ref().clone()).into_response())
}

#[derive(Serialize)]
struct TreeResponse {
    variant: Variant,
    tree: crate::tree::SurrogateTree,
    rendered: crate::explain::RenderedTree,
}

async fn get_tree(
    State(store): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(params): Query<TreeParams>,
) -> ApiResult<Json<TreeResponse>> {
    let out = blocking(move || {
        store.read(&id, |s| {
            let (variant, tree) = s.tree(params.variant)?;
            let mut rendered = crate::explain::render_tree(tree, s.domain())?;
            rendered.class_names = s.record().class_names.clone();
            Ok(TreeResponse {
                variant,
                tree: tree.clone(),
                rendered,
            })
        })
    })
    .await?;
    Ok(Json(out))
}

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/segmentation", put(update_segmentation))
        .route("/sessions/{id}/fit", post(fit))
        .route("/sessions/{id}/query", post(query))
        .route("/sessions/{id}/render/{file}", get(render))
        .route("/sessions/{id}/tree", get(get_tree))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

/// Serves the API on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, store: Arc<SessionStore>) -> Result<()> {
    axum::serve(listener, router(store)).await?;
    Ok(())
}
