//! JSON messages exchanged with clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Number of macro-actions in Five Rooms.
pub const ACTIONS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Paused,
    Finished,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Paused => "paused",
            Status::Finished => "finished",
        }
    }
}

/// State published at each decision boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "snapshot")]
pub struct Snapshot {
    pub episode: usize,
    pub step: usize,
    pub pos: [usize; 2],
    /// Learned policy at the agent's cell.
    pub policy: Vec<f64>,
    /// Advice waiting for the next decision.
    pub advice: Option<Vec<f64>>,
    /// Return of every finished episode.
    pub returns: Vec<f64>,
    pub status: Status,
}

/// Advice from a human: a single macro id or a full distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdviceMessage {
    #[serde(default)]
    pub action: Option<usize>,
    #[serde(default)]
    pub dist: Option<Vec<f64>>,
    /// Keep the advice until cleared instead of for the next decision only.
    #[serde(default)]
    pub persist: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    /// `pause`, `resume`, `set-speed` or `stop`.
    pub cmd: String,
    #[serde(default)]
    pub speed: Option<f64>,
}

/// Anything a client may send over the stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Advice(AdviceMessage),
    Control(ControlMessage),
}

/// Replies to advice and control messages, and errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Reply {
    Ack {
        /// Advice now pending, `None` after a clear.
        pending: Option<Vec<f64>>,
        persist: bool,
    },
    Status {
        status: Status,
        speed: Option<f64>,
    },
    Error {
        message: String,
    },
}

/// Body of `POST /sessions`. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub episodes: Option<usize>,
    /// Decisions per second; absent for the server default, `0` for unthrottled.
    #[serde(default)]
    pub speed: Option<f64>,
    /// Experiment config overrides, as accepted by `dpg run --set`.
    #[serde(default)]
    pub overrides: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
    pub status: Status,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn snapshot_shape() {
        let s = Snapshot {
            episode: 2,
            step: 3,
            pos: [1, 4],
            policy: vec![0.2; 5],
            advice: None,
            returns: vec![90.5],
            status: Status::Running,
        };
        assert_eq!(
            serde_json::to_value(&s).unwrap(),
            json!({"type": "snapshot", "episode": 2, "step": 3, "pos": [1, 4], "policy": [0.2, 0.2, 0.2, 0.2, 0.2],
                   "advice": null, "returns": [90.5], "status": "running"})
        );
    }

    #[test]
    fn client_messages_parse() {
        let a: ClientMessage =
            serde_json::from_str(r#"{"type":"advice","action":1,"dist":null,"persist":false}"#).unwrap();
        assert_eq!(
            a,
            ClientMessage::Advice(AdviceMessage {
                action: Some(1),
                dist: None,
                persist: false
            })
        );
        let c: ClientMessage = serde_json::from_str(r#"{"type":"control","cmd":"set-speed","speed":2.5}"#).unwrap();
        assert_eq!(
            c,
            ClientMessage::Control(ControlMessage {
                cmd: "set-speed".into(),
                speed: Some(2.5)
            })
        );
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type":"hello"}"#).is_err());
    }

    #[test]
    fn replies_are_tagged() {
        let r = Reply::Status {
            status: Status::Paused,
            speed: None,
        };
        assert_eq!(
            serde_json::to_value(&r).unwrap(),
            json!({"type": "status", "status": "paused", "speed": null})
        );
    }

    #[test]
    fn unknown_request_fields_rejected() {
        assert!(serde_json::from_str::<SessionRequest>(r#"{"sead": 1}"#).is_err());
        assert_eq!(
            serde_json::from_str::<SessionRequest>("{}").unwrap(),
            SessionRequest::default()
        );
    }
}
