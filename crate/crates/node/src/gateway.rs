//! The browser gateway: a WebSocket at `/gateway` carrying one JSON payload
//! per text message. Each socket is an ordinary `conn:N` connection of the
//! server's host, so sessions and deliveries work exactly as over TCP.

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use relaymesh_core::wire::json::{from_json_str, to_json_string};
use relaymesh_core::wire::{ErrorCode, Payload};
use tokio::sync::mpsc;

use crate::host::HostHandle;

pub fn router(handle: HostHandle) -> Router {
    Router::new().route("/gateway", get(upgrade)).with_state(handle)
}

async fn upgrade(ws: WebSocketUpgrade, State(handle): State<HostHandle>) -> Response {
    ws.on_upgrade(move |socket| session(socket, handle))
}

async fn session(mut socket: WebSocket, handle: HostHandle) {
    let (label, generation) = handle.inbound_label();
    let (tx, mut rx) = mpsc::unbounded_channel::<Payload>();
    handle.opened(label.clone(), generation, tx);

    loop {
        tokio::select! {
            out = rx.recv() => {
                let Some(p) = out else { break };
                if socket.send(Message::Text(to_json_string(&p).into())).await.is_err() {
                    break;
                }
            }
            inbound = socket.recv() => {
                let text = match inbound {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        let reply = malformed("binary messages are not accepted; send JSON text");
                        if socket.send(Message::Text(reply.into())).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                match from_json_str(&text).and_then(|p| p.to_frame()) {
                    Ok(frame) => handle.frame(label.clone(), frame),
                    Err(e) => {
                        if socket.send(Message::Text(malformed(&e.to_string()).into())).await.is_err() {
                            break;
                        }
                    }
                }
            }
        }
    }
    handle.closed(label, generation);
}

fn malformed(message: &str) -> String {
    to_json_string(&Payload::Error {
        code: ErrorCode::MalformedPayload.code(),
        message: message.to_string(),
    })
}
