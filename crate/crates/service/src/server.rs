//! HTTP and WebSocket front end. Each session runs in its own task and
//! drains an ordered command queue at every decision boundary.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::{sleep_until, Instant};

use crate::protocol::{AdviceMessage, ClientMessage, ControlMessage, Created, Reply, SessionRequest, Snapshot, Status};
use crate::session::{Session, SessionError};

enum Command {
    Advice(AdviceMessage, oneshot::Sender<Result<Reply, SessionError>>),
    Control(ControlMessage, oneshot::Sender<Result<Reply, SessionError>>),
    Csv(oneshot::Sender<(String, String)>),
}

#[derive(Clone)]
struct Handle {
    commands: mpsc::UnboundedSender<Command>,
    snapshots: watch::Receiver<Snapshot>,
}

/// Server-wide settings.
#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    /// Directory receiving `session-<id>.csv` and `session-<id>-events.csv` when a session ends.
    pub out_dir: Option<PathBuf>,
    /// Decisions per second of sessions that do not ask for a speed; `None` for unthrottled.
    pub default_speed: Option<f64>,
}

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServerConfig>,
    sessions: Arc<Mutex<HashMap<u64, Handle>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            config: Arc::new(config),
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    fn handle(&self, id: u64) -> Result<Handle, ApiError> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(&id)
            .cloned()
            .ok_or(ApiError(SessionError::Unknown(id)))
    }

    /// Starts a session and returns its id.
    pub fn create(&self, req: &SessionRequest) -> Result<u64, SessionError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let session = Session::new(id, req, self.config.default_speed)?;
        let (tx, rx) = mpsc::unbounded_channel();
        let (snap_tx, snap_rx) = watch::channel(session.snapshot());
        self.sessions.lock().expect("session table poisoned").insert(
            id,
            Handle {
                commands: tx,
                snapshots: snap_rx,
            },
        );
        log::info!(
            "session {id} created: seed {}, {} episodes",
            session.config().seeds[0],
            session.config().episodes
        );
        tokio::spawn(drive(session, rx, snap_tx, self.config.out_dir.clone()));
        Ok(id)
    }
}

fn flush(session: &Session, out_dir: &Option<PathBuf>) {
    let Some(dir) = out_dir else { return };
    let id = session.id();
    let result = std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(format!("session-{id}.csv")), session.curve_csv()))
        .and_then(|_| std::fs::write(dir.join(format!("session-{id}-events.csv")), session.events_csv()));
    match result {
        Ok(()) => log::info!("session {id}: wrote curve and event log to {}", dir.display()),
        Err(e) => log::error!("session {id}: writing output to {}: {e}", dir.display()),
    }
}

/// Applies one command; returns whether the session just finished.
fn apply(session: &mut Session, cmd: Command) -> bool {
    let was_finished = session.status() == Status::Finished;
    match cmd {
        Command::Advice(msg, reply) => {
            let _ = reply.send(session.inject(&msg));
        }
        Command::Control(msg, reply) => {
            let _ = reply.send(session.control(&msg));
        }
        Command::Csv(reply) => {
            let _ = reply.send((session.curve_csv(), session.events_csv()));
        }
    }
    !was_finished && session.status() == Status::Finished
}

async fn drive(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<Command>,
    snapshots: watch::Sender<Snapshot>,
    out_dir: Option<PathBuf>,
) {
    let id = session.id();
    loop {
        let mut changed = false;
        let mut finished_now = false;
        while let Ok(cmd) = commands.try_recv() {
            finished_now |= apply(&mut session, cmd);
            changed = true;
        }
        if session.status() == Status::Running {
            if let Err(e) = session.step() {
                log::error!("session {id}: {e}");
            }
            finished_now |= session.status() == Status::Finished;
            changed = true;
        }
        if changed {
            snapshots.send_replace(session.snapshot());
        }
        if finished_now {
            log::info!("session {id} finished after {} episodes", session.run().rows().len());
            flush(&session, &out_dir);
        }
        match (session.status(), session.speed()) {
            (Status::Running, None) => tokio::task::yield_now().await,
            (Status::Running, Some(speed)) => {
                let deadline = Instant::now() + Duration::from_secs_f64(1.0 / speed);
                loop {
                    tokio::select! {
                        _ = sleep_until(deadline) => break,
                        cmd = commands.recv() => match cmd {
                            Some(cmd) => {
                                if apply(&mut session, cmd) {
                                    flush(&session, &out_dir);
                                }
                                snapshots.send_replace(session.snapshot());
                                if session.status() != Status::Running || session.speed() != Some(speed) {
                                    break;
                                }
                            }
                            None => return,
                        },
                    }
                }
            }
            _ => match commands.recv().await {
                Some(cmd) => {
                    if apply(&mut session, cmd) {
                        flush(&session, &out_dir);
                    }
                    snapshots.send_replace(session.snapshot());
                }
                None => return,
            },
        }
    }
}

struct ApiError(SessionError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = match self.0 {
            SessionError::Unknown(_) => StatusCode::NOT_FOUND,
            SessionError::Finished | SessionError::NotRunning => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        (
            code,
            Json(Reply::Error {
                message: self.0.to_string(),
            }),
        )
            .into_response()
    }
}

fn gone() -> ApiError {
    ApiError(SessionError::Config("session task stopped".into()))
}

async fn create_session(State(app): State<AppState>, body: Option<Json<SessionRequest>>) -> Response {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    match app.create(&req) {
        Ok(id) => (
            StatusCode::CREATED,
            Json(Created {
                id,
                status: Status::Running,
            }),
        )
            .into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn get_session(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Json<Snapshot>, ApiError> {
    Ok(Json(app.handle(id)?.snapshots.borrow().clone()))
}

async fn send(handle: &Handle, msg: ClientMessage) -> Result<Reply, ApiError> {
    let (tx, rx) = oneshot::channel();
    let cmd = match msg {
        ClientMessage::Advice(a) => Command::Advice(a, tx),
        ClientMessage::Control(c) => Command::Control(c, tx),
    };
    handle.commands.send(cmd).map_err(|_| gone())?;
    rx.await.map_err(|_| gone())?.map_err(ApiError)
}

async fn post_advice(
    State(app): State<AppState>,
    Path(id): Path<u64>,
    Json(msg): Json<AdviceMessage>,
) -> Result<Json<Reply>, ApiError> {
    Ok(Json(send(&app.handle(id)?, ClientMessage::Advice(msg)).await?))
}

async fn post_control(
    State(app): State<AppState>,
    Path(id): Path<u64>,
    Json(msg): Json<ControlMessage>,
) -> Result<Json<Reply>, ApiError> {
    Ok(Json(send(&app.handle(id)?, ClientMessage::Control(msg)).await?))
}

async fn fetch_csv(app: &AppState, id: u64) -> Result<(String, String), ApiError> {
    let handle = app.handle(id)?;
    let (tx, rx) = oneshot::channel();
    handle.commands.send(Command::Csv(tx)).map_err(|_| gone())?;
    rx.await.map_err(|_| gone())
}

async fn get_csv(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let (curve, _) = fetch_csv(&app, id).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], curve).into_response())
}

async fn get_events(State(app): State<AppState>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let (_, events) = fetch_csv(&app, id).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], events).into_response())
}

async fn stream(State(app): State<AppState>, Path(id): Path<u64>, ws: WebSocketUpgrade) -> Result<Response, ApiError> {
    let handle = app.handle(id)?;
    Ok(ws.on_upgrade(move |socket| serve_socket(socket, handle)))
}

fn to_text<T: serde::Serialize>(value: &T) -> Message {
    Message::Text(serde_json::to_string(value).expect("messages serialize").into())
}

async fn serve_socket(socket: WebSocket, handle: Handle) {
    let (mut sink, mut incoming) = socket.split();
    let mut snapshots = handle.snapshots.clone();
    let first = snapshots.borrow_and_update().clone();
    if sink.send(to_text(&first)).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                let snap = snapshots.borrow_and_update().clone();
                if sink.send(to_text(&snap)).await.is_err() {
                    break;
                }
            }
            msg = incoming.next() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(m) => send(&handle, m).await.unwrap_or_else(|e| Reply::Error { message: e.0.to_string() }),
                    Err(e) => Reply::Error { message: format!("bad message: {e}") },
                };
                if sink.send(to_text(&reply)).await.is_err() {
                    break;
                }
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/advice", post(post_advice))
        .route("/sessions/{id}/control", post(post_control))
        .route("/sessions/{id}/csv", get(get_csv))
        .route("/sessions/{id}/events", get(get_events))
        .with_state(state)
}
