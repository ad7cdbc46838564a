use std::sync::Arc;

use futures_util::{SinkExt, StreamExt};
use pressense::core::synth::{keys_for_text, typing_session, SynthConfig, TypingPlan};
use pressense::core::touch::EngineEvent;
use pressense::core::PressureImage;
use pressense::layouts::{qwerty, LayoutRegistry};
use pressense::service::{router, ErrorCode, FrameMessage, Reply, SessionHandler, WireMessage};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

fn handler() -> SessionHandler {
    SessionHandler::new(Arc::new(LayoutRegistry::default()))
}

fn config(extra: Value) -> String {
    let mut v = json!({"type": "config", "session": "s1"});
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v.to_string()
}

fn frame_json(p: &PressureImage, t: f64) -> String {
    WireMessage::Frame(FrameMessage { session: "s1".into(), timestamp: t, pressure: Some(p.clone()), touches: None }).to_json()
}

fn only(reply: Reply) -> WireMessage {
    assert_eq!(reply.messages.len(), 1, "{reply:?}");
    reply.messages.into_iter().next().unwrap()
}

fn error_code(reply: Reply) -> ErrorCode {
    match only(reply) {
        WireMessage::Error(e) => e.code,
        other => panic!("expected an error, got {other:?}"),
    }
}

fn typing_frames(sentence: &str) -> Vec<PressureImage> {
    let keys = keys_for_text(sentence);
    let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
    typing_session(sentence, &keys, &qwerty(), &SynthConfig::default(), &TypingPlan::default(), "s1")
        .unwrap()
        .into_iter()
        .map(|r| r.pressure.unwrap())
        .collect()
}

#[test]
fn every_frame_gets_one_events_reply_in_order() {
    let mut h = handler();
    assert!(matches!(only(h.handle_text(&config(json!({"mode": "raw-events"})))), WireMessage::Ack(_)));
    let blank = PressureImage::zeros(185, 105);
    for i in 0..10 {
        match only(h.handle_text(&frame_json(&blank, i as f64 / 15.0))) {
            WireMessage::Events(e) => {
                assert_eq!(e.frame, i);
                assert!(e.events.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn frame_before_config_is_a_protocol_error() {
    let mut h = handler();
    let reply = h.handle_text(&frame_json(&PressureImage::zeros(185, 105), 0.0));
    assert!(!reply.close);
    assert_eq!(error_code(reply), ErrorCode::Protocol);
}

#[test]
fn malformed_json_closes_and_unknown_type_does_not() {
    let mut h = handler();
    let reply = h.handle_text("{\"type\": ");
    assert!(reply.close);
    assert_eq!(error_code(reply), ErrorCode::Parse);

    let reply = h.handle_text(r#"{"type":"hello","session":"s1"}"#);
    assert!(!reply.close);
    assert_eq!(error_code(reply), ErrorCode::Protocol);
    assert_eq!(error_code(h.handle_text(r#"{"session":"s1"}"#)), ErrorCode::Protocol);
}

#[test]
fn config_errors() {
    let mut h = handler();
    assert_eq!(error_code(h.handle_text(&config(json!({"layout": "dvorak"})))), ErrorCode::Invalid);
    assert_eq!(error_code(h.handle_text(&config(json!({"debounce_frames": 0})))), ErrorCode::Invalid);
    assert!(matches!(only(h.handle_text(&config(json!({})))), WireMessage::Ack(_)));
    assert_eq!(error_code(h.handle_text(&config(json!({})))), ErrorCode::Protocol);
}

#[test]
fn frame_size_change_is_a_session_error() {
    let mut h = handler();
    h.handle_text(&config(json!({"width": 20, "height": 10, "mode": "drawing"})));
    assert!(matches!(only(h.handle_text(&frame_json(&PressureImage::zeros(20, 10), 0.0))), WireMessage::Events(_)));
    assert_eq!(error_code(h.handle_text(&frame_json(&PressureImage::zeros(10, 10), 0.1))), ErrorCode::Session);
}

#[test]
fn sparse_touches_produce_strokes_in_drawing_mode() {
    let mut h = handler();
    h.handle_text(&config(json!({"mode": "drawing"})));
    let mut kinds = Vec::new();
    for i in 0..6 {
        let msg = json!({"type": "frame", "session": "s1", "timestamp": i as f64 / 15.0,
                         "touches": [{"x": 40.0 + i as f64, "y": 50.0, "pressure_kpa": 8.0}]});
        if let WireMessage::Events(e) = only(h.handle_text(&msg.to_string())) {
            for ev in e.events {
                assert!(ev.as_key().is_none());
                kinds.push(match ev {
                    EngineEvent::Touch(_) => "touch",
                    EngineEvent::Stroke(_) => "stroke",
                    EngineEvent::Key(_) => "key",
                });
            }
        }
    }
    assert_eq!(kinds.iter().filter(|k| **k == "touch").count(), 1);
    assert!(kinds.iter().filter(|k| **k == "stroke").count() >= 4);
}

fn run_typing(sentence: &str) -> Vec<String> {
    let mut h = handler();
    let mut out = vec![];
    let cfg = config(json!({"reference": sentence}));
    out.extend(h.handle_text(&cfg).messages.iter().map(WireMessage::to_json));
    for (i, f) in typing_frames(sentence).iter().enumerate() {
        out.extend(h.handle_text(&frame_json(f, i as f64 / 15.0)).messages.iter().map(WireMessage::to_json));
    }
    out
}

#[test]
fn keyboard_session_transcribes_deterministically() {
    let a = run_typing("hello world");
    assert_eq!(a, run_typing("hello world"));
    let transcript: Value = a.iter().map(|s| serde_json::from_str::<Value>(s).unwrap()).find(|v| v["type"] == "transcript").unwrap();
    assert_eq!(transcript["typed"], "hello world");
    assert_eq!(transcript["errors"], 0);
    assert!(transcript["wpm"].as_f64().unwrap() > 0.0);
}

async fn spawn_server() -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(Arc::new(LayoutRegistry::default()));
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

async fn http_get(addr: std::net::SocketAddr, path: &str) -> (String, Value) {
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let (head, body) = buf.split_once("\r\n\r\n").unwrap();
    (head.lines().next().unwrap().to_string(), serde_json::from_str(body).unwrap())
}

#[tokio::test]
async fn health_and_layouts_endpoints() {
    let addr = spawn_server().await;
    let (status, body) = http_get(addr, "/health").await;
    assert!(status.contains("200"));
    assert_eq!(body["status"], "ok");
    let (status, body) = http_get(addr, "/layouts").await;
    assert!(status.contains("200"));
    let layouts = body.as_array().unwrap();
    assert!(layouts.iter().any(|l| l["name"] == "qwerty"));
}

#[tokio::test]
async fn websocket_session_round_trip() {
    let addr = spawn_server().await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session")).await.unwrap();
    let sentence = "hi";
    ws.send(Message::text(config(json!({"reference": sentence})))).await.unwrap();
    let frames = typing_frames(sentence);
    for (i, f) in frames.iter().enumerate() {
        ws.send(Message::text(frame_json(f, i as f64 / 15.0))).await.unwrap();
    }
    let mut events = 0u64;
    let mut acked = false;
    let mut typed = None;
    while events < frames.len() as u64 || typed.is_none() {
        let Some(Ok(Message::Text(t))) = ws.next().await else { panic!("connection ended early") };
        match serde_json::from_str::<WireMessage>(&t).unwrap() {
            WireMessage::Ack(_) => acked = true,
            WireMessage::Events(e) => {
                assert_eq!(e.frame, events);
                events += 1;
            }
            WireMessage::Transcript(t) => typed = Some(t.typed),
            other => panic!("{other:?}"),
        }
    }
    assert!(acked);
    assert_eq!(typed.as_deref(), Some(sentence));

    ws.send(Message::text("not json")).await.unwrap();
    let Some(Ok(Message::Text(t))) = ws.next().await else { panic!() };
    assert!(matches!(serde_json::from_str::<WireMessage>(&t).unwrap(), WireMessage::Error(e) if e.code == ErrorCode::Parse));
    assert!(matches!(ws.next().await, Some(Ok(Message::Close(_))) | None));
}
