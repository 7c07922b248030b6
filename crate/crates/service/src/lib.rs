//! HTTP JSON API over claim verification and contestation sessions.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /verify` | [`VerifyRequest`] | [`VerifyResponse`] |
//! | `POST /sessions` | [`CreateSessionRequest`] | [`SessionView`] (201) |
//! | `GET /sessions/{id}` | | [`SessionView`] |
//! | `POST /sessions/{id}/contest` | `ContestationEdit` | [`ContestResponse`] |
//! | `POST /sessions/{id}/fork` | [`ForkRequest`] | [`SessionView`] (201) |
//! | `GET /semantics` | | [`SemanticsListing`] |
//! | `GET /health` | | [`Health`] |

pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use thiserror::Error;
use tower_http::cors::CorsLayer;

use qbaf_core::api::{
    ContestResponse, CreateSessionRequest, ErrorBody, ForkRequest, Health, SemanticsListing,
    SessionView, VerifyRequest, VerifyResponse,
};
use qbaf_core::backend::Backend;
use qbaf_core::contestation::{ContestError, ContestationEdit};
use qbaf_core::generation::GenerationError;
use qbaf_core::pipeline::{verify, Claim, PipelineError};
use qbaf_core::templates::TemplateSet;

pub use session::Session;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Directory for one JSON snapshot per session. `None` keeps sessions in memory only.
    pub snapshot_dir: Option<PathBuf>,
    /// Allow any origin, for a UI served from another port.
    pub permissive_cors: bool,
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("model backend failed: {0}")]
    BadGateway(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadGateway(_) => StatusCode::BAD_GATEWAY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::NotFound(_) => "not_found",
            ApiError::Unprocessable(_) => "invalid_edit",
            ApiError::BadGateway(_) => "backend_failure",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind().to_owned(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::BadRequest(r.body_text())
    }
}

impl From<ContestError> for ApiError {
    fn from(e: ContestError) -> Self {
        match e {
            ContestError::Malformed(_) => ApiError::BadRequest(e.to_string()),
            _ => ApiError::Unprocessable(e.to_string()),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::UnknownMethod(_)
            | PipelineError::EmptyClaim(_)
            | PipelineError::Generation(GenerationError::InvalidParams(_))
            | PipelineError::Generation(GenerationError::EmptyClaim) => {
                ApiError::BadRequest(e.to_string())
            }
            PipelineError::Backend(_)
            | PipelineError::Unparseable(_)
            | PipelineError::Generation(GenerationError::Backend { .. }) => {
                ApiError::BadGateway(e.to_string())
            }
            _ => ApiError::Internal(e.to_string()),
        }
    }
}

/// A session's latest state plus the lock that serializes its edits.
struct Slot {
    writer: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Session>>,
}

impl Slot {
    fn new(session: Session) -> Self {
        Self {
            writer: tokio::sync::Mutex::new(()),
            current: RwLock::new(Arc::new(session)),
        }
    }

    fn load(&self) -> Arc<Session> {
        self.current.read().expect("session lock poisoned").clone()
    }

    fn store(&self, session: Session) {
        *self.current.write().expect("session lock poisoned") = Arc::new(session);
    }
}

pub struct AppState {
    backend: Arc<dyn Backend>,
    templates: TemplateSet,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(backend: Arc<dyn Backend>, templates: TemplateSet, config: ServiceConfig) -> Self {
        Self {
            backend,
            templates,
            config,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Reloads every snapshot in the snapshot directory. Snapshots whose
    /// history does not replay to their recorded state are skipped.
    pub fn restore(&self) -> std::io::Result<usize> {
        let Some(dir) = &self.config.snapshot_dir else {
            return Ok(0);
        };
        if !dir.exists() {
            return Ok(0);
        }
        let mut restored = 0;
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let session = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Session>(&t).map_err(|e| e.to_string()));
            match session {
                Ok(s) if s.replays_consistently() => {
                    self.insert(s);
                    restored += 1;
                }
                Ok(s) => tracing::warn!("snapshot {} does not replay; skipped", s.id),
                Err(e) => tracing::warn!("unreadable snapshot {}: {e}", path.display()),
            }
        }
        Ok(restored)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.slot(id).map(|s| s.load())
    }

    fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    fn insert(&self, session: Session) {
        let id = session.id.clone();
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id, Arc::new(Slot::new(session)));
    }

    fn fresh_id(&self) -> String {
        loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if self.slot(&id).is_none() {
                return id;
            }
        }
    }

    async fn persist(&self, session: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.config.snapshot_dir else {
            return Ok(());
        };
        write_snapshot(dir, session)
            .await
            .map_err(|e| ApiError::Internal(format!("writing snapshot: {e}")))
    }

    async fn open(&self, session: Session) -> Result<SessionView, ApiError> {
        self.persist(&session).await?;
        let view = session.view();
        self.insert(session);
        Ok(view)
    }
}

async fn write_snapshot(dir: &Path, session: &Session) -> std::io::Result<()> {
    tokio::fs::create_dir_all(dir).await?;
    let path = dir.join(format!("{}.json", session.id));
    let tmp = dir.join(format!("{}.json.tmp", session.id));
    tokio::fs::write(&tmp, serde_json::to_vec_pretty(session)?).await?;
    tokio::fs::rename(tmp, path).await
}

type Body<T> = Result<Json<T>, JsonRejection>;

async fn verify_claim(
    State(state): State<Arc<AppState>>,
    body: Body<VerifyRequest>,
) -> Result<Json<VerifyResponse>, ApiError> {
    let Json(req) = body?;
    if req.claim.trim().is_empty() {
        return Err(ApiError::BadRequest("claim is empty".into()));
    }
    let claim = Claim {
        id: "request".into(),
        text: req.claim,
        context: req.context,
        gold_label: None,
    };
    let verdict = verify(&claim, &req.config, state.backend.as_ref(), &state.templates).await?;
    let session_id = match (&verdict.qbaf, req.config.method.is_contestable()) {
        (Some(qbaf), true) => {
            let session = Session::new(
                state.fresh_id(),
                qbaf.clone(),
                req.config.semantics,
                Some(verdict.transcript.clone()),
            )?;
            Some(state.open(session).await?.session_id)
        }
        _ => None,
    };
    Ok(Json(VerifyResponse { verdict, session_id }))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Body<CreateSessionRequest>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let Json(req) = body?;
    let session = Session::new(state.fresh_id(), req.qbaf, req.semantics, None)?;
    Ok((StatusCode::CREATED, Json(state.open(session).await?)))
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionView>, ApiError> {
    let session = state.session(&id).ok_or(ApiError::NotFound(id))?;
    Ok(Json(session.view()))
}

async fn contest(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Body<ContestationEdit>,
) -> Result<Json<ContestResponse>, ApiError> {
    let slot = state.slot(&id).ok_or(ApiError::NotFound(id))?;
    let Json(edit) = body?;
    let _writer = slot.writer.lock().await;
    let (next, diff) = slot.load().contest(&edit)?;
    state.persist(&next).await?;
    let view = next.view();
    slot.store(next);
    Ok(Json(ContestResponse { diff, session: view }))
}

async fn fork(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Body<ForkRequest>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let source = state.session(&id).ok_or(ApiError::NotFound(id))?;
    let Json(req) = body?;
    let forked = source.fork(state.fresh_id(), req.history_len)?;
    Ok((StatusCode::CREATED, Json(state.open(forked).await?)))
}

async fn list_semantics() -> Json<SemanticsListing> {
    Json(SemanticsListing::default())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        backend: state.backend.describe(),
        sessions: state.session_count(),
    })
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = state.config.permissive_cors;
    let app = Router::new()
        .route("/verify", post(verify_claim))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/contest", post(contest))
        .route("/sessions/{id}/fork", post(fork))
        .route("/semantics", get(list_semantics))
        .route("/health", get(health))
        .with_state(state);
    if cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Serves the API on `listener` until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    if let Some(addr) = addr {
        tracing::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state)).await
}
