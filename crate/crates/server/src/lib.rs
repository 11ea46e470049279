//! HTTP and websocket front end for live simulator sessions.

pub mod hub;
pub mod protocol;

use std::net::SocketAddr;
use std::sync::Arc;

use attentive_core::agent::AgentConfig;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

pub use hub::{Fixtures, Hub, HubError, LiveSession, SessionInfo, IN_PROGRESS};
pub use protocol::{Body, Control, Snapshot, Utterance, WireMessage};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub fixture: String,
    #[serde(default)]
    pub config: AgentConfig,
}

#[derive(Debug, Default, Deserialize)]
pub struct Since {
    #[serde(default)]
    pub since: u64,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn lookup(hub: &Hub, id: &str) -> Result<Arc<LiveSession>, Response> {
    hub.get(id)
        .ok_or_else(|| error(StatusCode::NOT_FOUND, format!("no session `{id}`")))
}

async fn create(State(hub): State<Arc<Hub>>, body: Result<Json<CreateRequest>, axum::extract::rejection::JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    match hub.create(&req.fixture, req.config) {
        Ok(s) => (
            StatusCode::CREATED,
            Json(json!({ "id": s.id(), "snapshot": s.snapshot() })),
        )
            .into_response(),
        Err(e @ HubError::UnknownFixture(_)) => error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

async fn list(State(hub): State<Arc<Hub>>) -> Response {
    Json(hub.list()).into_response()
}

async fn fixtures(State(hub): State<Arc<Hub>>) -> Response {
    Json(hub.fixtures().names()).into_response()
}

async fn show(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Response {
    match lookup(&hub, &id) {
        Ok(s) => Json(json!({ "info": s.info(), "snapshot": s.snapshot() })).into_response(),
        Err(r) => r,
    }
}

async fn delete(State(hub): State<Arc<Hub>>, Path(id): Path<String>) -> Response {
    if hub.remove(&id) {
        StatusCode::NO_CONTENT.into_response()
    } else {
        error(StatusCode::NOT_FOUND, format!("no session `{id}`"))
    }
}

async fn events(State(hub): State<Arc<Hub>>, Path(id): Path<String>, Query(q): Query<Since>) -> Response {
    match lookup(&hub, &id) {
        Ok(s) => Json(s.events_since(q.since)).into_response(),
        Err(r) => r,
    }
}

/// Same handling as a websocket frame; answers with the ack or error.
async fn post_message(State(hub): State<Arc<Hub>>, Path(id): Path<String>, body: String) -> Response {
    match lookup(&hub, &id) {
        Ok(s) => {
            let reply = s.handle_text(&body);
            let status = if matches!(reply.body, Body::Error(_)) {
                StatusCode::CONFLICT
            } else {
                StatusCode::OK
            };
            (status, Json(reply)).into_response()
        }
        Err(r) => r,
    }
}

async fn socket(
    State(hub): State<Arc<Hub>>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
    upgrade: WebSocketUpgrade,
) -> Response {
    match lookup(&hub, &id) {
        Ok(s) => upgrade.on_upgrade(move |ws| stream(ws, s, q.since)),
        Err(r) => r,
    }
}

/// Sends every log entry after `since` in order, then follows the log while
/// feeding client frames to the session.
async fn stream(mut ws: WebSocket, session: Arc<LiveSession>, since: u64) {
    let mut sent = since;
    let mut updates = session.subscribe();
    loop {
        for m in session.events_since(sent) {
            if ws.send(Message::Text(m.to_text().into())).await.is_err() {
                return;
            }
            sent = m.seq;
        }
        tokio::select! {
            changed = updates.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            frame = ws.recv() => match frame {
                Some(Ok(Message::Text(text))) => {
                    session.handle_text(text.as_str());
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/fixtures", get(fixtures))
        .route("/sessions", get(list).post(create))
        .route("/sessions/{id}", get(show).delete(delete))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/messages", axum::routing::post(post_message))
        .route("/sessions/{id}/ws", get(socket))
        .with_state(hub)
}

/// Binds and serves until the process ends.
pub async fn serve(addr: SocketAddr, hub: Arc<Hub>) -> std::io::Result<()> {
    serve_on(tokio::net::TcpListener::bind(addr).await?, hub).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, hub: Arc<Hub>) -> std::io::Result<()> {
    axum::serve(listener, router(hub)).await
}
