use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use orchestra::FeedbackRecord;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::error::HitlError;
use crate::session::{DecisionRequest, DecisionState, FlushReport, PendingDecision, Session, SessionState};

/// Read-only view published after every mutation.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub state: SessionState,
    pub decisions: Vec<PendingDecision>,
    pub feedback: Vec<FeedbackRecord>,
}

impl Snapshot {
    fn of(session: &Session) -> Self {
        Self {
            state: session.state(),
            decisions: session.decisions(),
            feedback: session.feedback().to_vec(),
        }
    }
}

type Reply<T> = oneshot::Sender<Result<T, HitlError>>;

enum Command {
    Step(Reply<PendingDecision>),
    Resolve(u64, DecisionRequest, Reply<PendingDecision>),
    Expire(Duration),
    Flush(Reply<FlushReport>),
}

/// Cloneable handle to the session actor.
#[derive(Clone)]
pub struct Handle {
    tx: mpsc::Sender<Command>,
    snapshot: watch::Receiver<Arc<Snapshot>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Handle {
    /// Moves `session` onto a dedicated task. The returned join handle yields
    /// the session back once every handle is dropped.
    pub fn spawn(session: Session) -> (Self, tokio::task::JoinHandle<Session>) {
        let (tx, mut rx) = mpsc::channel::<Command>(64);
        let (snap_tx, snap_rx) = watch::channel(Arc::new(Snapshot::of(&session)));
        let join = tokio::spawn(async move {
            let mut session = session;
            while let Some(cmd) = rx.recv().await {
                match cmd {
                    Command::Step(reply) => {
                        let _ = reply.send(session.step(now_ms()));
                    }
                    Command::Resolve(id, req, reply) => {
                        let _ = reply.send(session.resolve(id, &req, now_ms()));
                    }
                    Command::Expire(age) => {
                        let now = now_ms();
                        let _ = session.expire(now.saturating_sub(age.as_millis() as u64), now);
                    }
                    Command::Flush(reply) => {
                        let _ = reply.send(session.flush());
                        continue;
                    }
                }
                let _ = snap_tx.send(Arc::new(Snapshot::of(&session)));
            }
            session
        });
        (Self { tx, snapshot: snap_rx }, join)
    }

    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, HitlError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.map_err(|_| HitlError::Unavailable)?;
        rx.await.map_err(|_| HitlError::Unavailable)?
    }

    pub async fn step(&self) -> Result<PendingDecision, HitlError> {
        self.call(Command::Step).await
    }

    pub async fn resolve(&self, id: u64, req: DecisionRequest) -> Result<PendingDecision, HitlError> {
        self.call(|r| Command::Resolve(id, req, r)).await
    }

    pub async fn flush(&self) -> Result<FlushReport, HitlError> {
        self.call(Command::Flush).await
    }

    pub async fn expire_older_than(&self, age: Duration) -> Result<(), HitlError> {
        self.tx.send(Command::Expire(age)).await.map_err(|_| HitlError::Unavailable)
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.borrow().clone()
    }
}

#[derive(Debug, Deserialize)]
struct DecisionFilter {
    state: Option<DecisionState>,
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn get_state(State(h): State<Handle>) -> Json<SessionState> {
    Json(h.snapshot().state.clone())
}

async fn post_step(State(h): State<Handle>) -> Result<(StatusCode, Json<PendingDecision>), HitlError> {
    Ok((StatusCode::CREATED, Json(h.step().await?)))
}

async fn post_decision(
    State(h): State<Handle>,
    Path(id): Path<u64>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<PendingDecision>, HitlError> {
    let Json(req) = body.map_err(|e| HitlError::Invalid(e.body_text()))?;
    Ok(Json(h.resolve(id, req).await?))
}

async fn get_decisions(State(h): State<Handle>, Query(filter): Query<DecisionFilter>) -> Json<Vec<PendingDecision>> {
    let snap = h.snapshot();
    Json(
        snap.decisions
            .iter()
            .filter(|d| filter.state.is_none_or(|s| d.state == s))
            .cloned()
            .collect(),
    )
}

async fn get_decision(State(h): State<Handle>, Path(id): Path<u64>) -> Result<Json<PendingDecision>, HitlError> {
    h.snapshot()
        .decisions
        .iter()
        .find(|d| d.decision_id == id)
        .cloned()
        .map(Json)
        .ok_or(HitlError::NotFound(id))
}

async fn get_feedback(State(h): State<Handle>) -> Json<Vec<FeedbackRecord>> {
    Json(h.snapshot().feedback.clone())
}

async fn post_flush(State(h): State<Handle>) -> Result<Json<FlushReport>, HitlError> {
    Ok(Json(h.flush().await?))
}

/// API routes, permissive CORS, and an optional static-file fallback.
pub fn router(handle: Handle, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/state", get(get_state))
        .route("/api/step", post(post_step))
        .route("/api/decisions", get(get_decisions))
        .route("/api/decision/{id}", get(get_decision).post(post_decision))
        .route("/api/feedback", get(get_feedback))
        .route("/api/feedback/flush", post(post_flush))
        .with_state(handle)
        .layer(CorsLayer::permissive());
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Clone, Debug, Default)]
pub struct ServeOptions {
    pub static_dir: Option<PathBuf>,
    /// Demo mode: take a step on this interval.
    pub auto_step: Option<Duration>,
    /// Demo mode: pending decisions older than this expire.
    pub expire_after: Option<Duration>,
}

/// Serves until `shutdown` resolves, then flushes the feedback log if a path
/// is configured and returns the session.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    options: ServeOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<Session, HitlError> {
    let has_path = session.has_feedback_path();
    let (handle, join) = Handle::spawn(session);
    let ticker = spawn_demo_ticker(handle.clone(), &options);
    let app = router(handle.clone(), options.static_dir.clone());
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| HitlError::Io(e.to_string()));
    if let Some(t) = ticker {
        t.abort();
        let _ = t.await;
    }
    let flushed = if has_path { handle.flush().await.map(|_| ()) } else { Ok(()) };
    drop(handle);
    let session = join.await.map_err(|_| HitlError::Unavailable)?;
    served?;
    flushed?;
    Ok(session)
}

fn spawn_demo_ticker(handle: Handle, options: &ServeOptions) -> Option<tokio::task::JoinHandle<()>> {
    let (step, expire) = (options.auto_step, options.expire_after);
    let period = match (step, expire) {
        (None, None) => return None,
        (Some(s), _) => s,
        (None, Some(e)) => e / 2,
    };
    Some(tokio::spawn(async move {
        let mut interval = tokio::time::interval(period.max(Duration::from_millis(1)));
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            if let Some(age) = expire {
                if handle.expire_older_than(age).await.is_err() {
                    break;
                }
            }
            if step.is_some() {
                match handle.step().await {
                    Ok(_) | Err(HitlError::QueueFull { .. }) => {}
                    Err(_) => break,
                }
            }
        }
    }))
}
