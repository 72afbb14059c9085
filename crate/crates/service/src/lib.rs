//! HTTP facade over a [`QueryQueue`] so a human can answer label queries
//! while detection runs.
//!
//! The service only moves queries from pending to answered. The detection
//! loop owns the detector and folds answers in at its next emission.
//!
//! | Route | Result |
//! |---|---|
//! | `GET /api/queries?status=pending` | queries, oldest first |
//! | `POST /api/queries/{id}/label` with `{"class": "sudden"}` | 204, or 404 / 409 / 422 |
//! | `GET /api/status` | the loop's last [`StatusSnapshot`] |

use std::net::SocketAddr;
use std::str::FromStr;

use axum::extract::{Path, Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metadrift::active::{LabelError, LabelQuery, QueryQueue, QueryStatus, StatusSnapshot};
use metadrift::streamgen::DriftKind;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use tower_http::cors::{Any, CorsLayer};

pub const DEFAULT_PORT: u16 = 8787;

/// Wire form of a [`LabelQuery`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDto {
    pub id: u64,
    pub gaps: Vec<f64>,
    /// Error-rate window means behind the gaps, oldest first.
    pub window_means: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub entropy: f64,
    pub issued_at: usize,
    pub status: QueryStatus,
    pub label: Option<DriftKind>,
}

impl From<&LabelQuery> for QueryDto {
    fn from(q: &LabelQuery) -> Self {
        Self {
            id: q.id,
            gaps: q.meta_sample.gaps.clone(),
            window_means: q.window_means.clone(),
            probabilities: q.probabilities.clone(),
            entropy: q.entropy,
            issued_at: q.issued_at,
            status: q.status,
            label: q.label,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct LabelBody {
    pub class: String,
}

#[derive(Debug, Deserialize)]
pub struct ListParams {
    pub status: Option<String>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(code: StatusCode, msg: impl Into<String>) -> Response {
    (code, Json(ErrorBody { error: msg.into() })).into_response()
}

/// The API routes over `queue`, with permissive CORS for the console.
pub fn router(queue: QueryQueue) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/queries", get(list_queries))
        .route("/api/queries/{id}/label", post(label_query))
        .route("/api/status", get(status))
        .layer(cors)
        .with_state(queue)
}

async fn list_queries(State(queue): State<QueryQueue>, Query(params): Query<ListParams>) -> Response {
    let filter = match params.status.as_deref() {
        None | Some("all") => None,
        Some("pending") => Some(QueryStatus::Pending),
        Some("answered") => Some(QueryStatus::Answered),
        Some("expired") => Some(QueryStatus::Expired),
        Some(other) => return error(StatusCode::BAD_REQUEST, format!("unknown status `{other}`")),
    };
    let dtos: Vec<QueryDto> = queue.list(filter).iter().map(QueryDto::from).collect();
    Json(dtos).into_response()
}

async fn label_query(State(queue): State<QueryQueue>, Path(id): Path<u64>, Json(body): Json<LabelBody>) -> Response {
    let class = match DriftKind::from_str(&body.class) {
        Ok(c) => c,
        Err(_) => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("class must be sudden, gradual, incremental or normal, got `{}`", body.class),
            )
        }
    };
    match queue.answer(id, class) {
        Ok(()) => {
            log::info!("query {id} labelled {class}");
            StatusCode::NO_CONTENT.into_response()
        }
        Err(e @ LabelError::NotFound) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ LabelError::NotPending(_)) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn status(State(queue): State<QueryQueue>) -> Json<StatusSnapshot> {
    Json(queue.status())
}

/// Serves the API until `shutdown` resolves.
pub async fn serve(
    queue: QueryQueue,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(queue)).with_graceful_shutdown(shutdown).await
}

/// A server running on its own thread and runtime, for synchronous callers.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn spawn(queue: QueryQueue, addr: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("label-service".into())
            .spawn(move || {
                runtime.block_on(serve(queue, listener, async {
                    let _ = stopped.await;
                }))
            })?;
        log::info!("label service listening on http://{addr}");
        Ok(Self {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server exits on its own (it only does on error).
    pub fn wait(mut self) -> std::io::Result<()> {
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("label service panicked"))),
            None => Ok(()),
        }
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("label service panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Err(e) = self.stop_and_join() {
            log::warn!("label service stopped with an error: {e}");
        }
    }
}
