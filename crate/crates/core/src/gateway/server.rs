//! Local chat-completions endpoint that answers from a [`MockScript`].
//!
//! Requests are routed by the `x-utterance-id` and `x-prompt-id` headers.
//! Since sample indices never reach a backend, the n-th request for a given
//! (utterance, prompt) pair receives the n-th scripted response.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use super::http::{PROMPT_HEADER, UTTERANCE_HEADER};
use super::mock::MockScript;
use super::{GatewayError, PromptId};

#[derive(Default)]
struct Shared {
    script: MockScript,
    counters: HashMap<(String, PromptId), usize>,
    /// Remaining requests to answer with 503 before serving normally.
    fail_next: usize,
    requests: Vec<Value>,
}

type AppState = Arc<Mutex<Shared>>;

fn error(status: StatusCode, msg: impl Into<String>) -> (StatusCode, Json<Value>) {
    (status, Json(json!({"error": {"message": msg.into()}})))
}

async fn completions(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let mut shared = state.lock().expect("mock server state poisoned");
    shared.requests.push(body.clone());
    if shared.fail_next > 0 {
        shared.fail_next -= 1;
        return error(StatusCode::SERVICE_UNAVAILABLE, "injected failure");
    }
    let header = |name: &str| {
        headers
            .get(name)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string)
    };
    let (Some(utterance), Some(prompt)) = (header(UTTERANCE_HEADER), header(PROMPT_HEADER)) else {
        return error(StatusCode::BAD_REQUEST, "missing routing headers");
    };
    let Ok(prompt) = prompt.parse::<PromptId>() else {
        return error(StatusCode::BAD_REQUEST, format!("unknown prompt {prompt}"));
    };
    if body["messages"].as_array().is_none_or(Vec::is_empty) {
        return error(StatusCode::BAD_REQUEST, "no messages");
    }
    if shared.script.fails(&utterance, prompt) {
        return error(StatusCode::SERVICE_UNAVAILABLE, "scripted failure");
    }
    let n = {
        let c = shared
            .counters
            .entry((utterance.clone(), prompt))
            .or_insert(0);
        *c += 1;
        *c - 1
    };
    match shared.script.response(&utterance, prompt, n) {
        Some(text) => (
            StatusCode::OK,
            Json(json!({
                "object": "chat.completion",
                "model": body["model"],
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }],
            })),
        ),
        None => error(
            StatusCode::NOT_FOUND,
            format!("no script for {utterance}/{prompt}"),
        ),
    }
}

/// Handle to a running mock server. Dropping it shuts the server down.
pub struct MockServer {
    addr: SocketAddr,
    state: AppState,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Bind `addr` (port 0 picks a free port) and serve on a background thread.
    pub fn start(script: MockScript, addr: &str) -> Result<Self, GatewayError> {
        let io = |e: std::io::Error| GatewayError::BackendUnavailable(format!("mock server: {e}"));
        let listener = std::net::TcpListener::bind(addr).map_err(io)?;
        listener.set_nonblocking(true).map_err(io)?;
        let addr = listener.local_addr().map_err(io)?;
        let state: AppState = Arc::new(Mutex::new(Shared {
            script,
            ..Shared::default()
        }));
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .with_state(state.clone());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_io()
            .build()
            .map_err(io)?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::from_std(listener) {
                    Ok(l) => l,
                    Err(e) => {
                        log::error!("mock server listener: {e}");
                        return;
                    }
                };
                let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = serve.await {
                    log::error!("mock server stopped: {e}");
                }
            });
        });
        Ok(Self {
            addr,
            state,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// API root to use as `ALM_BASE_URL`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Answer the next `n` requests with HTTP 503.
    pub fn fail_next(&self, n: usize) {
        self.state
            .lock()
            .expect("mock server state poisoned")
            .fail_next = n;
    }

    /// Bodies of every request received so far.
    pub fn requests(&self) -> Vec<Value> {
        self.state
            .lock()
            .expect("mock server state poisoned")
            .requests
            .clone()
    }

    /// Block until the server stops (it only stops when shut down).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
