use std::net::SocketAddr;

use axum::extract::{Path, Query, State as AxState};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crowdcell_core::annotation::{CellClass, WorkerId};
use crowdcell_core::records::{format_timestamp, votes_to_string};

use crate::model::*;
use crate::service::Orchestrator;
use crate::state::{BatchSpec, Registration};
use crate::OrchestratorError;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for OrchestratorError {
    fn into_response(self) -> Response {
        use OrchestratorError::*;
        let status = match &self {
            UnknownWorker(_) | UnknownTask(_) | UnknownBatch(_) | UnknownAssignment(_) | NoneAvailable => {
                StatusCode::NOT_FOUND
            }
            NotQualified(_) => StatusCode::FORBIDDEN,
            WorkerExists(_) | DeadlineExceeded(_) | WrongState { .. } | DuplicateItem(_) => StatusCode::CONFLICT,
            InvalidLabel(_) | InvalidAnswers(_) | EmptyBatch | Config(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
            Stopped => StatusCode::SERVICE_UNAVAILABLE,
        };
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, OrchestratorError>;

pub fn router(orch: Orchestrator) -> Router {
    let images = orch.config().image_dir.clone();
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/workers", post(register))
        .route("/workers/{id}", get(worker))
        .route("/batches", post(create_batch))
        .route("/batches/{id}", get(batch))
        .route("/batches/{id}/votes.csv", get(votes_csv))
        .route("/batches/{id}/report", get(report))
        .route("/assignments/next", get(next_assignment))
        .route("/assignments/{id}/submit", post(submit))
        .route("/assignments/{id}/approve", post(approve))
        .route("/assignments/{id}/reject", post(reject))
        .route("/tasks/{id}", get(task))
        .route("/admin/sweep", post(sweep))
        .with_state(orch);
    if let Some(dir) = images {
        app = app.nest_service("/images", ServeDir::new(dir));
    }
    app
}

/// Binds, then serves until `shutdown` resolves. A background sweep runs
/// every `sweep_every`.
pub async fn serve(
    orch: Orchestrator,
    listener: tokio::net::TcpListener,
    sweep_every: std::time::Duration,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = orch.clone();
    let ticker = tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep_every);
        tick.tick().await;
        loop {
            tick.tick().await;
            match sweeper.sweep(None).await {
                Ok(s) if !(s.approved.is_empty() && s.expired_assignments.is_empty() && s.expired_tasks.is_empty()) => {
                    tracing::info!(
                        approved = s.approved.len(),
                        expired_assignments = s.expired_assignments.len(),
                        expired_tasks = s.expired_tasks.len(),
                        "sweep"
                    );
                }
                Ok(_) => {}
                Err(OrchestratorError::Stopped) => break,
                Err(e) => tracing::warn!("sweep failed: {e}"),
            }
        }
    });
    let r = axum::serve(listener, router(orch)).with_graceful_shutdown(shutdown).await;
    ticker.abort();
    r
}

pub async fn bind(orch: &Orchestrator) -> std::io::Result<tokio::net::TcpListener> {
    let cfg = orch.config();
    let addr: SocketAddr = format!("{}:{}", cfg.bind, cfg.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    tokio::net::TcpListener::bind(addr).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn register(AxState(o): AxState<Orchestrator>, Json(reg): Json<Registration>) -> ApiResult<impl IntoResponse> {
    let profile = o.register_worker(reg).await?;
    Ok((StatusCode::CREATED, Json(o.worker(&profile.worker_id)?)))
}

async fn worker(AxState(o): AxState<Orchestrator>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(o.worker(&WorkerId::new(id))?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchCreated {
    pub batch_id: BatchId,
    pub tasks: Vec<TaskId>,
}

async fn create_batch(AxState(o): AxState<Orchestrator>, Json(spec): Json<BatchSpec>) -> ApiResult<impl IntoResponse> {
    let (batch_id, tasks) = o.create_batch(spec).await?;
    Ok((StatusCode::CREATED, Json(BatchCreated { batch_id, tasks })))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchView {
    pub batch: Batch,
    pub tasks: Vec<TaskSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: TaskId,
    pub state: TaskState,
    pub submitted: usize,
    pub k: usize,
}

async fn batch(AxState(o): AxState<Orchestrator>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let s = o.read();
    let batch = s.batch(BatchId(id))?.clone();
    let tasks = batch
        .tasks
        .iter()
        .map(|t| {
            let task = &s.tasks[t];
            TaskSummary {
                task_id: *t,
                state: task.state,
                submitted: task
                    .assignments
                    .iter()
                    .filter(|a| s.assignments[a].state.has_answers())
                    .count(),
                k: task.k,
            }
        })
        .collect();
    Ok(Json(BatchView { batch, tasks }))
}

async fn votes_csv(AxState(o): AxState<Orchestrator>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    let votes = o.batch_votes(BatchId(id))?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], votes_to_string(&votes)))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(
    AxState(o): AxState<Orchestrator>,
    Path(id): Path<u64>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let r = o.batch_report(BatchId(id))?;
    Ok(match q.format.as_deref() {
        Some("text") => {
            let text = r.metrics.as_ref().map(|m| m.to_text()).unwrap_or_default();
            ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response()
        }
        _ => Json(r).into_response(),
    })
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    worker_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemView {
    pub item_id: String,
    pub image_url: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AssignmentView {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub worker_id: String,
    pub claimed_at: String,
    pub deadline: String,
    pub reward_usd: f64,
    pub items: Vec<ItemView>,
    pub labels: Vec<CellClass>,
}

async fn next_assignment(AxState(o): AxState<Orchestrator>, Query(q): Query<NextQuery>) -> ApiResult<impl IntoResponse> {
    let a = o.claim_next(q.worker_id).await?;
    let s = o.read();
    let task = &s.tasks[&a.task_id];
    let batch = &s.batches[&task.batch_id];
    let items = task
        .items
        .iter()
        .map(|id| ItemView {
            item_id: id.to_string(),
            image_url: batch
                .items
                .iter()
                .find(|b| &b.item_id == id)
                .and_then(|b| b.image.as_ref())
                .map(|p| format!("/images/{}", p.trim_start_matches('/'))),
        })
        .collect();
    Ok(Json(AssignmentView {
        assignment_id: a.assignment_id,
        task_id: a.task_id,
        worker_id: a.worker_id.to_string(),
        claimed_at: format_timestamp(&a.claimed_at),
        deadline: format_timestamp(&a.deadline),
        reward_usd: usd(task.reward),
        items,
        labels: CellClass::ALL.to_vec(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerBody {
    pub item_id: String,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitBody {
    pub answers: Vec<AnswerBody>,
}

async fn submit(
    AxState(o): AxState<Orchestrator>,
    Path(id): Path<u64>,
    Json(body): Json<SubmitBody>,
) -> ApiResult<impl IntoResponse> {
    let answers = body
        .answers
        .into_iter()
        .map(|a| {
            let label: CellClass = a.label.parse().map_err(|_| OrchestratorError::InvalidLabel(a.label.clone()))?;
            Ok(Answer {
                item_id: a.item_id.into(),
                label,
            })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(Json(o.submit(AssignmentId(id), answers).await?))
}

async fn approve(AxState(o): AxState<Orchestrator>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(o.review(AssignmentId(id), true).await?))
}

async fn reject(AxState(o): AxState<Orchestrator>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(o.review(AssignmentId(id), false).await?))
}

async fn task(AxState(o): AxState<Orchestrator>, Path(id): Path<u64>) -> ApiResult<impl IntoResponse> {
    Ok(Json(o.task_status(TaskId(id))?))
}

#[derive(Debug, Deserialize)]
struct SweepQuery {
    now: Option<DateTime<Utc>>,
}

async fn sweep(AxState(o): AxState<Orchestrator>, Query(q): Query<SweepQuery>) -> ApiResult<impl IntoResponse> {
    Ok(Json(o.sweep(q.now).await?))
}
