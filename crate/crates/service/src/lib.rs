//! Live DPG training sessions on Five Rooms. A human steers the agent by
//! injecting advice while snapshots stream out over a WebSocket.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{AdviceMessage, ClientMessage, ControlMessage, Reply, SessionRequest, Snapshot, Status};
pub use server::{router, AppState, ServerConfig};
pub use session::{Session, SessionError};
