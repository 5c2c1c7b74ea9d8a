use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

use dpg_service::{router, AppState, ServerConfig};

fn app(speed: Option<f64>, out_dir: Option<std::path::PathBuf>) -> Router {
    router(AppState::new(ServerConfig {
        out_dir,
        default_speed: speed,
    }))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn wait_for<F: Fn(&Value) -> bool>(app: &Router, id: u64, pred: F) -> Value {
    for _ in 0..2000 {
        let (_, snap) = call_json(app, "GET", &format!("/sessions/{id}"), None).await;
        if pred(&snap) {
            return snap;
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
    panic!("condition never reached");
}

#[tokio::test]
async fn session_lifecycle_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(Some(200.0), Some(dir.path().to_path_buf()));

    let (status, created) = call_json(&app, "POST", "/sessions", Some(json!({"seed": 3, "episodes": 50}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = created["id"].as_u64().unwrap();
    let (_, other) = call_json(&app, "POST", "/sessions", None).await;
    assert_ne!(other["id"].as_u64().unwrap(), id);

    let snap = wait_for(&app, id, |s| s["type"] == "snapshot").await;
    assert_eq!(snap["policy"].as_array().unwrap().len(), 5);

    let (status, ack) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/advice"),
        Some(json!({"type": "advice", "action": 2, "dist": null, "persist": true})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        ack,
        json!({"type": "ack", "pending": [0.0, 0.0, 1.0, 0.0, 0.0], "persist": true})
    );

    let (status, paused) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/control"),
        Some(json!({"type": "control", "cmd": "pause", "speed": null})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(paused["status"], "paused");
    let a = call_json(&app, "GET", &format!("/sessions/{id}"), None).await.1;
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    let b = call_json(&app, "GET", &format!("/sessions/{id}"), None).await.1;
    assert_eq!(a, b);
    assert_eq!(a["status"], "paused");
    assert_eq!(a["advice"], json!([0.0, 0.0, 1.0, 0.0, 0.0]));

    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/advice"),
        Some(json!({"action": 9, "dist": null, "persist": false})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/control"),
        Some(json!({"cmd": "fly", "speed": null})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, resumed) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/control"),
        Some(json!({"cmd": "resume"})),
    )
    .await;
    assert_eq!(resumed["status"], "running");
    let (_, sped) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/control"),
        Some(json!({"cmd": "set-speed", "speed": 0})),
    )
    .await;
    assert_eq!(sped, json!({"type": "status", "status": "running", "speed": null}));
    wait_for(&app, id, |s| s["returns"].as_array().is_some_and(|r| !r.is_empty())).await;

    let (_, stopped) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/control"),
        Some(json!({"cmd": "stop"})),
    )
    .await;
    assert_eq!(stopped["status"], "finished");
    let (status, _) = call_json(
        &app,
        "POST",
        &format!("/sessions/{id}/advice"),
        Some(json!({"action": 0, "dist": null, "persist": false})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, csv) = call(&app, "GET", &format!("/sessions/{id}/csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("seed,episode,return,steps,interventions\n3,0,"));
    let on_disk = std::fs::read_to_string(dir.path().join(format!("session-{id}.csv"))).unwrap();
    assert_eq!(on_disk, csv);
    let events = std::fs::read_to_string(dir.path().join(format!("session-{id}-events.csv"))).unwrap();
    assert!(events.lines().nth(1).unwrap().contains(",advice,2,none"));
    let (status, served) = call(&app, "GET", &format!("/sessions/{id}/events"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(served).unwrap(), events);
}

#[tokio::test]
async fn errors_for_unknown_sessions_and_bad_configs() {
    let app = app(None, None);
    let (status, body) = call_json(&app, "GET", "/sessions/99", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["type"], "error");
    let (status, _) = call_json(&app, "POST", "/sessions/99/control", Some(json!({"cmd": "pause"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(
        &app,
        "POST",
        "/sessions",
        Some(json!({"overrides": {"env": "two-state"}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", "/sessions", Some(json!({"episodes": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(&app, "POST", "/sessions", Some(json!({"bogus": 1}))).await;
    assert!(status.is_client_error());
}

async fn next_json<S>(ws: &mut S) -> Value
where
    S: futures::Stream<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

#[tokio::test]
async fn websocket_round_trip() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = app(Some(100.0), None);
    let served = app.clone();
    tokio::spawn(async move { axum::serve(listener, served).await.unwrap() });

    let (_, created) = call_json(&app, "POST", "/sessions", Some(json!({"seed": 1, "episodes": 20}))).await;
    let id = created["id"].as_u64().unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream"))
        .await
        .unwrap();

    let first = next_json(&mut ws).await;
    assert_eq!(first["type"], "snapshot");

    ws.send(Message::Text(
        json!({"type": "control", "cmd": "pause", "speed": null})
            .to_string()
            .into(),
    ))
    .await
    .unwrap();
    ws.send(Message::Text(
        json!({"type": "advice", "action": 4, "dist": null, "persist": false})
            .to_string()
            .into(),
    ))
    .await
    .unwrap();
    ws.send(Message::Text("{\"type\":\"nonsense\"}".into())).await.unwrap();

    let mut replies = Vec::new();
    let mut last_snapshot = None;
    while replies.len() < 3 {
        let msg = next_json(&mut ws).await;
        if msg["type"] == "snapshot" {
            last_snapshot = Some(msg);
        } else {
            replies.push(msg);
        }
    }
    assert_eq!(
        replies[0],
        json!({"type": "status", "status": "paused", "speed": 100.0})
    );
    assert_eq!(replies[1]["type"], "ack");
    assert_eq!(replies[1]["pending"], json!([0.0, 0.0, 0.0, 0.0, 1.0]));
    assert_eq!(replies[2]["type"], "error");

    let snap = match last_snapshot {
        Some(s) if s["advice"] != Value::Null => s,
        _ => loop {
            let msg = next_json(&mut ws).await;
            if msg["type"] == "snapshot" && msg["advice"] != Value::Null {
                break msg;
            }
        },
    };
    assert_eq!(snap["status"], "paused");
    assert_eq!(snap["advice"], json!([0.0, 0.0, 0.0, 0.0, 1.0]));
    ws.close(None).await.unwrap();
}
