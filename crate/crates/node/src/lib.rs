//! HTTP front end of the gateway. Request and response bodies are the
//! canonical JSON forms used on the chain.
//!
//! Status codes: 200 for GRANTED, 403 for DENIED, 400 for malformed
//! requests, 500 for any other failure. Failures carry
//! `{"error":{"code":...,"message":...}}`, plus `audit_seq` when the call
//! was recorded.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use certchain_core::chain_apps::UseCase;
use certchain_core::codec::{to_canonical, CanonicalBytes};
use certchain_core::gateway::{Gateway, ResultOutcome, UseCaseRequest, UseCaseResult};

/// Path of the endpoint serving `op`.
pub fn route_of(op: UseCase) -> &'static str {
    match op {
        UseCase::Register => "/uc/register",
        UseCase::Grant => "/uc/grant",
        UseCase::Revoke => "/uc/revoke",
        UseCase::Access => "/uc/access",
        UseCase::Verify => "/uc/verify",
        UseCase::OwnerChange => "/uc/owner-change",
        UseCase::ControllerChange => "/uc/controller-change",
        UseCase::AuditLog => "/uc/audit",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_seq: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

fn canonical_response(status: StatusCode, body: CanonicalBytes) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body.into_vec()).into_response()
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>, audit_seq: Option<u64>) -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            code: code.into(),
            message: message.into(),
            audit_seq,
        },
    };
    canonical_response(status, to_canonical(&body).expect("error body is canonical"))
}

fn result_response(result: UseCaseResult) -> Response {
    match result.outcome {
        ResultOutcome::Granted | ResultOutcome::Denied => {
            let status = if result.is_granted() {
                StatusCode::OK
            } else {
                StatusCode::FORBIDDEN
            };
            match to_canonical(&result) {
                Ok(body) => canonical_response(status, body),
                Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None),
            }
        }
        ResultOutcome::Error => {
            let code = result.reason.unwrap_or_else(|| "internal".into());
            let status = if code == "invalid_request" {
                StatusCode::BAD_REQUEST
            } else {
                StatusCode::INTERNAL_SERVER_ERROR
            };
            error_response(status, &code, result.message.unwrap_or_default(), Some(result.audit_seq))
        }
    }
}

async fn dispatch(gateway: Arc<Gateway>, expected: UseCase, body: &[u8]) -> Response {
    let req = match UseCaseRequest::from_canonical(body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "invalid_request", e.to_string(), None),
    };
    if req.operation != expected {
        let msg = format!("{:?} request sent to {}", req.operation, route_of(expected));
        return error_response(StatusCode::BAD_REQUEST, "invalid_request", msg, None);
    }
    // The gateway serializes on its own lock and writes the chain file.
    match tokio::task::spawn_blocking(move || gateway.handle(&req)).await {
        Ok(result) => result_response(result),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None),
    }
}

fn use_case_route(op: UseCase) -> axum::routing::MethodRouter<Arc<Gateway>> {
    post(move |State(gw): State<Arc<Gateway>>, body: Bytes| async move { dispatch(gw, op, &body).await })
}

#[derive(Deserialize)]
struct AuditQuery {
    request: String,
}

async fn audit(State(gw): State<Arc<Gateway>>, query: Result<Query<AuditQuery>, QueryRejection>) -> Response {
    match query {
        Ok(Query(q)) => dispatch(gw, UseCase::AuditLog, q.request.as_bytes()).await,
        Err(e) => error_response(StatusCode::BAD_REQUEST, "invalid_request", e.body_text(), None),
    }
}

async fn validate(State(gw): State<Arc<Gateway>>) -> Response {
    let report = tokio::task::spawn_blocking(move || gw.validate()).await;
    match report.map(|r| to_canonical(&r)) {
        Ok(Ok(body)) => canonical_response(StatusCode::OK, body),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string(), None),
    }
}

#[derive(Deserialize)]
struct BlocksQuery {
    #[serde(default)]
    from: u64,
    limit: Option<u64>,
}

async fn blocks(State(gw): State<Arc<Gateway>>, query: Result<Query<BlocksQuery>, QueryRejection>) -> Response {
    let Query(q) = match query {
        Ok(q) => q,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, "invalid_request", e.body_text(), None),
    };
    let all = gw.blocks();
    let mut out = b"[".to_vec();
    let selected = all
        .iter()
        .skip(q.from as usize)
        .take(q.limit.unwrap_or(u64::MAX) as usize);
    for (i, b) in selected.enumerate() {
        if i > 0 {
            out.push(b',');
        }
        out.extend_from_slice(b.to_canonical().as_bytes());
    }
    out.push(b']');
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], out).into_response()
}

async fn not_found() -> Response {
    error_response(StatusCode::NOT_FOUND, "not_found", "no such endpoint", None)
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    let mut r = Router::new();
    for op in UseCase::ALL {
        if op != UseCase::AuditLog {
            r = r.route(route_of(op), use_case_route(op));
        }
    }
    r.route("/uc/audit", get(audit))
        .route("/chain/validate", get(validate))
        .route("/chain/blocks", get(blocks))
        .fallback(not_found)
        .with_state(gateway)
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    gateway: Arc<Gateway>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A node running on its own thread and runtime, stopped on drop. Meant
/// for embedding in tests and synchronous programs.
pub struct BackgroundNode {
    addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundNode {
    pub fn start(gateway: Arc<Gateway>, addr: SocketAddr) -> std::io::Result<BackgroundNode> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel();
        let thread = std::thread::spawn(move || {
            rt.block_on(serve(listener, gateway, async {
                let _ = rx.await;
            }))
        });
        Ok(BackgroundNode {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundNode {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
