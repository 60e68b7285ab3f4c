//! HTTP session API with an in-memory store and optional write-through.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use beamctl_core::array::{Angle, ArrayConfig};
use beamctl_core::metrics::GridSpec;
use beamctl_core::session::{Method, Session, StepRequest, StepSummary};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::config::ArraySource;
use crate::error::{io_err, CliError};
use crate::experiment::{PatternExport, PatternMeta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub array: ArraySource,
    pub theta0_deg: f64,
    pub method: Method,
    /// Grid used for `J`; defaults to -90..90 at 0.2 deg.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: Uuid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: Uuid,
    pub method: Method,
    pub theta0_deg: f64,
    pub array: ArrayConfig,
    pub grid: GridSpec,
    pub steps: Vec<StepSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UndoResult {
    pub undone: bool,
    pub step_count: usize,
    pub last: Option<StepSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternQuery {
    pub from_deg: Option<f64>,
    pub to_deg: Option<f64>,
    pub step_deg: Option<f64>,
}

impl PatternQuery {
    fn grid(&self) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            from_deg: self.from_deg.unwrap_or(d.from_deg),
            to_deg: self.to_deg.unwrap_or(d.to_deg),
            step_deg: self.step_deg.unwrap_or(d.step_deg),
        }
    }
}

/// On-disk form of one session: replaying `requests` rebuilds it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistedSession {
    pub id: Uuid,
    pub array: ArrayConfig,
    pub theta0_deg: f64,
    pub method: Method,
    pub grid: GridSpec,
    pub requests: Vec<StepRequest>,
    pub steps: Vec<StepSummary>,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
    #[error("{1}")]
    Rejected(StatusCode, String),
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::Rejected(r.status(), r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::Rejected(r.status(), r.body_text())
    }
}

impl From<beamctl_core::Error> for ApiError {
    fn from(e: beamctl_core::Error) -> Self {
        ApiError::Invalid(e.to_string())
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Io { .. } | CliError::Json(_) => ApiError::Internal(e.to_string()),
            other => ApiError::Invalid(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Rejected(s, _) => s,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct Entry {
    grid: GridSpec,
    session: Session,
}

impl Entry {
    fn persisted(&self, id: Uuid) -> PersistedSession {
        let s = &self.session;
        PersistedSession {
            id,
            array: s.model().to_config(),
            theta0_deg: s.theta0().degrees(),
            method: s.method(),
            grid: self.grid,
            requests: s.requests(),
            steps: s.summaries().into_iter().cloned().collect(),
        }
    }

    fn view(&self, id: Uuid) -> SessionView {
        let p = self.persisted(id);
        SessionView {
            id,
            method: p.method,
            theta0_deg: p.theta0_deg,
            array: p.array,
            grid: p.grid,
            steps: p.steps,
        }
    }
}

/// Sessions are independent; each one serialises its own mutations.
#[derive(Default)]
pub struct Store {
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Entry>>>>,
    persist: Option<PathBuf>,
}

fn build_session(req: &CreateSession) -> ApiResult<Entry> {
    if !req.theta0_deg.is_finite() || !(-90.0..=90.0).contains(&req.theta0_deg) {
        return Err(ApiError::Invalid(format!(
            "theta0_deg = {} is outside [-90, 90]",
            req.theta0_deg
        )));
    }
    let model = req.array.resolve()?;
    let grid = req.grid.unwrap_or_default();
    let session = Session::new(model, Angle::from_degrees(req.theta0_deg), req.method).with_metric_grid(grid)?;
    Ok(Entry { grid, session })
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store backed by a directory of JSON files; existing files are replayed.
    pub fn with_persistence(dir: impl Into<PathBuf>) -> crate::error::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let src = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let p: PersistedSession = serde_json::from_str(&src)?;
            let create = CreateSession {
                array: ArraySource::Inline(p.array.clone()),
                theta0_deg: p.theta0_deg,
                method: p.method,
                grid: Some(p.grid),
            };
            let mut entry = build_session(&create).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for r in &p.requests {
                entry.session.step(*r)?;
            }
            sessions.insert(p.id, Arc::new(Mutex::new(entry)));
        }
        tracing::info!(count = sessions.len(), dir = %dir.display(), "loaded sessions");
        Ok(Self {
            sessions: RwLock::new(sessions),
            persist: Some(dir),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn file(&self, id: Uuid) -> Option<PathBuf> {
        self.persist.as_ref().map(|d| d.join(format!("{id}.json")))
    }

    fn write_through(&self, id: Uuid, entry: &Entry) -> ApiResult<()> {
        if let Some(path) = self.file(id) {
            let body =
                serde_json::to_string_pretty(&entry.persisted(id)).map_err(|e| ApiError::Internal(e.to_string()))?;
            std::fs::write(&path, body).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    fn get(&self, id: &str) -> ApiResult<(Uuid, Arc<Mutex<Entry>>)> {
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::NotFound(id.to_string()))?;
        let map = self.sessions.read().expect("store lock");
        map.get(&uuid)
            .cloned()
            .map(|e| (uuid, e))
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub fn create(&self, req: &CreateSession) -> ApiResult<Uuid> {
        let entry = build_session(req)?;
        let id = Uuid::new_v4();
        self.write_through(id, &entry)?;
        self.sessions
            .write()
            .expect("store lock")
            .insert(id, Arc::new(Mutex::new(entry)));
        Ok(id)
    }

    pub fn step(&self, id: &str, req: StepRequest) -> ApiResult<StepSummary> {
        let (uuid, entry) = self.get(id)?;
        let mut e = entry.lock().expect("session lock");
        let summary = e.session.step(req)?.clone();
        self.write_through(uuid, &e)?;
        Ok(summary)
    }

    pub fn undo(&self, id: &str) -> ApiResult<UndoResult> {
        let (uuid, entry) = self.get(id)?;
        let mut e = entry.lock().expect("session lock");
        let undone = e.session.undo();
        self.write_through(uuid, &e)?;
        Ok(UndoResult {
            undone,
            step_count: e.session.step_count(),
            last: e.session.last_summary().cloned(),
        })
    }

    pub fn view(&self, id: &str) -> ApiResult<SessionView> {
        let (uuid, entry) = self.get(id)?;
        let e = entry.lock().expect("session lock");
        Ok(e.view(uuid))
    }

    pub fn pattern(&self, id: &str, grid: &GridSpec) -> ApiResult<PatternExport> {
        let (_, entry) = self.get(id)?;
        let session = entry.lock().expect("session lock").session.clone();
        let pattern = session.pattern(grid)?;
        let meta = PatternMeta {
            theta0_deg: session.theta0().degrees(),
            method: session.method(),
            step: session.step_count(),
        };
        Ok(PatternExport::new(&pattern, meta))
    }

    pub fn delete(&self, id: &str) -> ApiResult<()> {
        let (uuid, _) = self.get(id)?;
        self.sessions.write().expect("store lock").remove(&uuid);
        if let Some(path) = self.file(uuid) {
            if path.exists() {
                std::fs::remove_file(&path).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
            }
        }
        Ok(())
    }

    pub fn persist_dir(&self) -> Option<&FsPath> {
        self.persist.as_deref()
    }
}

async fn create(
    State(store): State<Arc<Store>>,
    req: std::result::Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(req) = req?;
    let id = store.create(&req)?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn step(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    req: std::result::Result<Json<StepRequest>, JsonRejection>,
) -> ApiResult<Json<StepSummary>> {
    let Json(req) = req?;
    store.step(&id, req).map(Json)
}

async fn pattern(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    q: std::result::Result<Query<PatternQuery>, QueryRejection>,
) -> ApiResult<Json<PatternExport>> {
    let Query(q) = q?;
    store.pattern(&id, &q.grid()).map(Json)
}

async fn undo(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<UndoResult>> {
    store.undo(&id).map(Json)
}

async fn show(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    store.view(&id).map(Json)
}

async fn remove(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    store.delete(&id).map(|_| StatusCode::NO_CONTENT)
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show).delete(remove))
        .route("/sessions/{id}/steps", post(step))
        .route("/sessions/{id}/pattern", get(pattern))
        .route("/sessions/{id}/undo", post(undo))
        .with_state(store)
}

pub async fn serve(addr: SocketAddr, store: Arc<Store>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
