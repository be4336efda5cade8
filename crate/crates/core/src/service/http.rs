//! HTTP front end. Sessions live in memory; requests to one session are
//! serialized by its lock, distinct sessions proceed independently. The
//! group scan and the local fit run as background jobs unless the request
//! asks to `wait`.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex as AsyncMutex;

use super::session::{
    DatasetRef, FitLocalRequest, RegionalizeRequest, Session, SessionSnapshot, SpecRequest, Stage,
};
use crate::diagnostics::ScanConfig;
use crate::error::Error;
use crate::groups::GroupKey;

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn not_found(kind: &'static str, message: String) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            kind,
            message,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match &e {
            Error::Stage(_) => (StatusCode::CONFLICT, "stage"),
            Error::UnknownSession(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::UnknownVariable(_)
            | Error::UnknownAttribute(_)
            | Error::UnknownBehavior(_)
            | Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::Malformed(_)
            | Error::InvalidFeatures(_)
            | Error::DuplicateIds(_)
            | Error::EmptyJoin
            | Error::EmptyGroup(_)
            | Error::Csv(_)
            | Error::Io { .. } => (StatusCode::BAD_REQUEST, "invalid_request"),
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "computation"),
        };
        ApiError {
            status,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<super::StageError> for ApiError {
    fn from(e: super::StageError) -> Self {
        Error::Stage(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.kind, "message": self.message}))).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Done { result: Value },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize)]
struct Job {
    job_id: String,
    session_id: String,
    kind: &'static str,
    #[serde(flatten)]
    status: JobStatus,
}

#[derive(Default)]
struct Inner {
    sessions: Mutex<HashMap<String, Arc<AsyncMutex<Session>>>>,
    jobs: Mutex<BTreeMap<String, Job>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

/// Shared server state.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    fn session(&self, id: &str) -> Result<Arc<AsyncMutex<Session>>, ApiError> {
        self.inner
            .sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()).into())
    }

    fn insert(&self, session: Session) -> String {
        let id = session.id.clone();
        self.inner
            .sessions
            .lock()
            .expect("session table poisoned")
            .insert(id.clone(), Arc::new(AsyncMutex::new(session)));
        id
    }

    fn fresh_id(&self) -> String {
        format!("s{}", self.inner.next_session.fetch_add(1, Ordering::SeqCst) + 1)
    }

    fn set_job(&self, job: Job) {
        self.inner
            .jobs
            .lock()
            .expect("job table poisoned")
            .insert(job.job_id.clone(), job);
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/restore", post(restore_session))
        .route("/sessions/{id}", get(session_status).delete(delete_session))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/variables", get(variables))
        .route("/sessions/{id}/correlation", get(correlation))
        .route("/sessions/{id}/spec", post(set_spec))
        .route("/sessions/{id}/group-scan", post(group_scan))
        .route("/sessions/{id}/select-group", post(select_group))
        .route("/sessions/{id}/fit-local", post(fit_local))
        .route("/sessions/{id}/regionalize", post(regionalize))
        .route("/sessions/{id}/projection", get(projection))
        .route("/sessions/{id}/glyphs", get(glyphs))
        .route("/sessions/{id}/cluster-histograms", get(cluster_histograms))
        .route("/sessions/{id}/parallel-sets-sample", get(parallel_sets_sample))
        .route("/sessions/{id}/representative", get(representative))
        .route("/jobs/{job_id}", get(job_status))
        .with_state(state);
    Router::new().nest(API_PREFIX, api)
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}{API_PREFIX}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new())).await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f)
        .await
        .expect("blocking task panicked")
}

async fn create_session(State(st): State<AppState>, Json(dataset): Json<DatasetRef>) -> ApiResult<(StatusCode, Json<Value>)> {
    let id = st.fresh_id();
    let session = blocking(move || {
        let mut s = Session::new(id);
        s.load(dataset, None)?;
        Ok::<_, Error>(s)
    })
    .await?;
    let body = json!({
        "session_id": session.id,
        "variables": session.variables_payload()?,
    });
    st.insert(session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn restore_session(State(st): State<AppState>, Json(snap): Json<SessionSnapshot>) -> ApiResult<(StatusCode, Json<Value>)> {
    let id = st.fresh_id();
    let session = blocking(move || Session::restore(id, &snap)).await?;
    let body = session.status();
    st.insert(session);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn session_status(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.status()))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let removed = st.inner.sessions.lock().expect("session table poisoned").remove(&id);
    match removed {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(Error::UnknownSession(id).into()),
    }
}

async fn snapshot(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(json!(s.snapshot())))
}

async fn variables(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.variables_payload()?))
}

#[derive(Deserialize)]
struct CorrelationQuery {
    /// Comma-separated names; every variable when absent.
    variables: Option<String>,
}

async fn correlation(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<CorrelationQuery>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    let vars = q
        .variables
        .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
    Ok(Json(json!(s.correlation(vars)?)))
}

async fn set_spec(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<SpecRequest>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().await;
    s.set_spec(req)?;
    Ok(Json(s.status()))
}

#[derive(Deserialize, Default)]
struct WaitQuery {
    #[serde(default)]
    wait: bool,
}

/// Runs `work` on the locked session, either inline (`wait`) or as a job
/// whose id is returned with status 202. Prerequisites are checked first so
/// out-of-order requests fail immediately.
async fn run_job(
    st: AppState,
    id: String,
    kind: &'static str,
    stage: Stage,
    wait: bool,
    work: impl FnOnce(&mut Session) -> Result<Value, Error> + Send + 'static,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let session = st.session(&id)?;
    let guard = session.lock_owned().await;
    guard.require(stage)?;
    if wait {
        let value = blocking(move || {
            let mut g = guard;
            work(&mut g)
        })
        .await?;
        return Ok((StatusCode::OK, Json(value)));
    }
    let job_id = format!("j{}", st.inner.next_job.fetch_add(1, Ordering::SeqCst) + 1);
    st.set_job(Job {
        job_id: job_id.clone(),
        session_id: id.clone(),
        kind,
        status: JobStatus::Running,
    });
    let st2 = st.clone();
    let jid = job_id.clone();
    tokio::spawn(async move {
        let result = blocking(move || {
            let mut g = guard;
            work(&mut g)
        })
        .await;
        let status = match result {
            Ok(result) => JobStatus::Done { result },
            Err(e) => JobStatus::Failed { error: e.to_string() },
        };
        st2.set_job(Job {
            job_id: jid,
            session_id: id,
            kind,
            status,
        });
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({"job_id": job_id, "status_url": format!("{API_PREFIX}/jobs/{job_id}")})),
    ))
}

async fn group_scan(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
    Json(cfg): Json<ScanConfig>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    run_job(st, id, "group-scan", Stage::Scan, q.wait, move |s| {
        Ok(super::scan_payload(s.scan(cfg)?))
    })
    .await
}

#[derive(Deserialize)]
struct SelectGroup {
    group: GroupKey,
}

async fn select_group(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<SelectGroup>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().await;
    let series = s.select_group(req.group)?;
    Ok(Json(json!({
        "group": series.group.label(),
        "coverage": series.coverage,
        "defined_units": series.defined_units().len(),
    })))
}

async fn fit_local(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WaitQuery>,
    Json(req): Json<FitLocalRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    run_job(st, id, "fit-local", Stage::FitLocal, q.wait, move |s| {
        s.fit_local(req)?;
        super::local_payload(s)
    })
    .await
}

async fn regionalize(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<RegionalizeRequest>) -> ApiResult {
    let s = st.session(&id)?;
    let guard = s.lock_owned().await;
    guard.require(Stage::Regionalize)?;
    let value = blocking(move || {
        let mut g = guard;
        g.regionalize(req)?;
        super::regionalization_payload(&g)
    })
    .await?;
    Ok(Json(value))
}

async fn projection(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.projection()?))
}

async fn glyphs(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.glyphs()?))
}

#[derive(Deserialize)]
struct BinsQuery {
    bins: Option<usize>,
}

async fn cluster_histograms(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<BinsQuery>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.cluster_histograms(q.bins.unwrap_or(10))?))
}

#[derive(Deserialize)]
struct SampleQuery {
    cluster: usize,
    m: usize,
    #[serde(default)]
    seed: u64,
}

async fn parallel_sets_sample(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<SampleQuery>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().await;
    Ok(Json(s.parallel_sets_sample(q.cluster, q.m, q.seed)?))
}

#[derive(Deserialize)]
struct ClusterQuery {
    cluster: usize,
}

async fn representative(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<ClusterQuery>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().await;
    Ok(Json(s.representative(q.cluster)?))
}

async fn job_status(State(st): State<AppState>, Path(job_id): Path<String>) -> ApiResult {
    let jobs = st.inner.jobs.lock().expect("job table poisoned");
    let job = jobs
        .get(&job_id)
        .ok_or_else(|| ApiError::not_found("not_found", format!("unknown job `{job_id}`")))?;
    Ok(Json(json!(job)))
}
