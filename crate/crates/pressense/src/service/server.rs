use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Json};
use axum::routing::get;
use axum::Router;
use pressense_core::touch::KeyLayout;
use serde_json::json;

use super::session::SessionHandler;
use crate::layouts::LayoutRegistry;

pub fn router(layouts: Arc<LayoutRegistry>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/layouts", get(list_layouts))
        .route("/session", get(session))
        .with_state(layouts)
}

/// Serves until the listener fails or the process receives Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, layouts: Arc<LayoutRegistry>) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(layouts))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn list_layouts(State(layouts): State<Arc<LayoutRegistry>>) -> Json<Vec<KeyLayout>> {
    Json(layouts.iter().cloned().collect())
}

async fn session(ws: WebSocketUpgrade, State(layouts): State<Arc<LayoutRegistry>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, layouts))
}

async fn run_session(mut socket: WebSocket, layouts: Arc<LayoutRegistry>) {
    let mut handler = SessionHandler::new(layouts);
    while let Some(msg) = socket.recv().await {
        let reply = match msg {
            Ok(Message::Text(t)) => handler.handle_text(t.as_str()),
            Ok(Message::Binary(_)) => handler.malformed("binary messages are not supported"),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        for m in reply.messages {
            if socket.send(Message::Text(m.to_json().into())).await.is_err() {
                return;
            }
        }
        if reply.close {
            let _ = socket.send(Message::Close(None)).await;
            break;
        }
    }
}
