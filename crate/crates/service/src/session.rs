//! A live training session, advanced one decision at a time.

use std::sync::Arc;

use thiserror::Error;

use dpg_core::advice::{AdviceEvent, AdviceLog, Distribution, EventKind};
use dpg_core::agents::Learner;
use dpg_core::envs::{canonical_map, GridMap};
use dpg_core::harness::{
    build_advisor, build_env, build_learner, write_csv, AgentKind, AnyLearner, DecisionOutcome, EnvId,
    ExperimentConfig, HarnessError, LearningCurve, TrainingRun,
};
use dpg_core::mdp::Advice;

use crate::protocol::{AdviceMessage, ControlMessage, Reply, SessionRequest, Snapshot, Status, ACTIONS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown session {0}")]
    Unknown(u64),
    #[error("session is finished")]
    Finished,
    #[error("session is not running")]
    NotRunning,
    #[error("invalid advice: {0}")]
    Advice(String),
    #[error("invalid control: {0}")]
    Control(String),
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Validates a decisions-per-second cap; `0` means unthrottled.
pub fn parse_speed(speed: f64) -> Result<Option<f64>, String> {
    if !speed.is_finite() || speed < 0.0 {
        return Err(format!("speed must be a finite non-negative number, got {speed}"));
    }
    Ok((speed > 0.0).then_some(speed))
}

/// Experiment config of a session request: Five Rooms, DPG, no simulated
/// teacher unless overridden.
pub fn experiment_config(req: &SessionRequest) -> Result<ExperimentConfig, SessionError> {
    let mut cfg = ExperimentConfig::scenario("pg-plain")?;
    cfg.name = "session".into();
    for (k, v) in &req.overrides {
        cfg.set(k, v)?;
    }
    cfg.seeds = vec![req.seed.unwrap_or(0)];
    if let Some(n) = req.episodes {
        cfg.episodes = n;
    }
    if cfg.env != EnvId::FiveRooms || cfg.agent != AgentKind::Dpg {
        return Err(SessionError::Config(format!(
            "sessions run dpg on five-rooms, got {} on {}",
            cfg.agent, cfg.env
        )));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq)]
struct Pending {
    dist: Distribution,
    persist: bool,
}

pub struct Session {
    id: u64,
    config: ExperimentConfig,
    map: Arc<GridMap>,
    run: TrainingRun<AnyLearner>,
    status: Status,
    speed: Option<f64>,
    pending: Option<Pending>,
    log: AdviceLog,
}

impl Session {
    pub fn new(id: u64, req: &SessionRequest, default_speed: Option<f64>) -> Result<Self, SessionError> {
        let config = experiment_config(req)?;
        let speed = match req.speed {
            Some(s) => parse_speed(s).map_err(SessionError::Config)?,
            None => default_speed,
        };
        let seed = config.seeds[0];
        let run = TrainingRun::new(
            seed,
            build_env(config.env, config.encoding),
            build_learner(&config, seed)?,
            build_advisor(&config)?,
            config.episodes,
            config.max_decisions,
        )?;
        Ok(Self {
            id,
            config,
            map: Arc::new(canonical_map()),
            run,
            status: Status::Running,
            speed,
            pending: None,
            log: Vec::new(),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn speed(&self) -> Option<f64> {
        self.speed
    }

    pub fn run(&self) -> &TrainingRun<AnyLearner> {
        &self.run
    }

    /// Human interventions so far, one per advised decision.
    pub fn events(&self) -> &[AdviceEvent] {
        &self.log
    }

    pub fn pending(&self) -> Option<&Distribution> {
        self.pending.as_ref().map(|p| &p.dist)
    }

    /// Queues advice for the next decision. Uniform advice clears whatever is pending.
    pub fn inject(&mut self, msg: &AdviceMessage) -> Result<Reply, SessionError> {
        if self.status == Status::Finished {
            return Err(SessionError::Finished);
        }
        let dist = match (msg.action, &msg.dist) {
            (Some(a), None) if a < ACTIONS => Distribution::one_hot(ACTIONS, a),
            (Some(a), None) => return Err(SessionError::Advice(format!("action {a} out of range 0..{ACTIONS}"))),
            (None, Some(d)) if d.len() == ACTIONS => {
                Distribution::new(d.clone()).map_err(|e| SessionError::Advice(e.to_string()))?
            }
            (None, Some(d)) => {
                return Err(SessionError::Advice(format!(
                    "dist has {} entries, expected {ACTIONS}",
                    d.len()
                )))
            }
            _ => {
                return Err(SessionError::Advice(
                    "exactly one of action and dist is required".into(),
                ))
            }
        };
        if dist.is_uniform() {
            self.pending = None;
            return Ok(Reply::Ack {
                pending: None,
                persist: false,
            });
        }
        self.pending = Some(Pending {
            dist: dist.clone(),
            persist: msg.persist,
        });
        Ok(Reply::Ack {
            pending: Some(dist.into_vec()),
            persist: msg.persist,
        })
    }

    pub fn control(&mut self, msg: &ControlMessage) -> Result<Reply, SessionError> {
        if self.status == Status::Finished && msg.cmd != "stop" {
            return Err(SessionError::Finished);
        }
        match msg.cmd.as_str() {
            "pause" => self.status = Status::Paused,
            "resume" => self.status = Status::Running,
            "set-speed" => {
                let s = msg.speed.unwrap_or(0.0);
                self.speed = parse_speed(s).map_err(SessionError::Control)?;
            }
            "stop" => self.status = Status::Finished,
            other => {
                return Err(SessionError::Control(format!(
                    "unknown command {other:?}, expected pause, resume, set-speed or stop"
                )))
            }
        }
        Ok(self.status_reply())
    }

    pub fn status_reply(&self) -> Reply {
        Reply::Status {
            status: self.status,
            speed: self.speed,
        }
    }

    /// Takes one decision, using pending advice if any.
    pub fn step(&mut self) -> Result<DecisionOutcome, SessionError> {
        match self.status {
            Status::Finished => return Err(SessionError::Finished),
            Status::Paused => return Err(SessionError::NotRunning),
            Status::Running => {}
        }
        let advice = match &self.pending {
            Some(p) => {
                self.log.push(AdviceEvent {
                    episode: self.run.episode(),
                    step: self.run.step(),
                    kind: EventKind::Advice {
                        action: p.dist.argmax(),
                    },
                    remaining: None,
                });
                Some(Advice::given(p.dist.clone()))
            }
            None => None,
        };
        if self.pending.as_ref().is_some_and(|p| !p.persist) {
            self.pending = None;
        }
        let outcome = match self.run.decide(advice) {
            Ok(o) => o,
            Err(e) => {
                self.status = Status::Finished;
                return Err(e.into());
            }
        };
        if self.run.is_finished() {
            self.status = Status::Finished;
        }
        Ok(outcome)
    }

    /// Learned policy at the agent's current cell.
    pub fn policy(&self) -> Result<Distribution, SessionError> {
        let state = self.run.state();
        let obs = self.run.env().encode(state);
        Ok(self.run.learner().policy_at(state, &obs).map_err(HarnessError::from)?)
    }

    pub fn snapshot(&self) -> Snapshot {
        let cell = self.run.state();
        let (row, col) = self.map.position(cell);
        let policy = match self.policy() {
            Ok(p) => p.into_vec(),
            Err(e) => {
                log::warn!("session {}: policy unavailable: {e}", self.id);
                Distribution::uniform(ACTIONS).into_vec()
            }
        };
        Snapshot {
            episode: self.run.episode(),
            step: self.run.step(),
            pos: [row, col],
            policy,
            advice: self.pending().map(|d| d.probs().to_vec()),
            returns: self.run.rows().iter().map(|r| r.ret).collect(),
            status: self.status,
        }
    }

    /// Learning curve of the finished episodes, in the harness CSV format.
    pub fn curve_csv(&self) -> String {
        let curve = LearningCurve {
            rows: self.run.rows().to_vec(),
        };
        let mut buf = Vec::new();
        write_csv(&curve, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Intervention log, one `episode,step,kind,value,remaining` line per event.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("episode,step,kind,value,remaining\n");
        for e in &self.log {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(episodes: usize) -> Session {
        let req = SessionRequest {
            episodes: Some(episodes),
            ..SessionRequest::default()
        };
        Session::new(1, &req, None).unwrap()
    }

    fn advice(action: Option<usize>, dist: Option<Vec<f64>>, persist: bool) -> AdviceMessage {
        AdviceMessage { action, dist, persist }
    }

    #[test]
    fn fresh_session_starts_at_the_start_cell() {
        let s = session(3);
        let snap = s.snapshot();
        let map = canonical_map();
        let (r, c) = map.position(map.start());
        assert_eq!((snap.episode, snap.step, snap.pos), (0, 0, [r, c]));
        assert_eq!(snap.status, Status::Running);
        assert!(snap.returns.is_empty() && snap.advice.is_none());
        assert!((snap.policy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_advice() {
        let mut s = session(3);
        assert!(s.inject(&advice(Some(5), None, false)).is_err());
        assert!(s.inject(&advice(None, Some(vec![0.5, 0.5]), false)).is_err());
        assert!(s
            .inject(&advice(None, Some(vec![0.5, 0.6, 0.0, 0.0, 0.0]), false))
            .is_err());
        assert!(s.inject(&advice(None, None, false)).is_err());
        assert!(s.inject(&advice(Some(1), Some(vec![0.2; 5]), false)).is_err());
        assert!(s.pending().is_none());
    }

    #[test]
    fn status_transitions() {
        let mut s = session(3);
        let ctl = |cmd: &str| ControlMessage {
            cmd: cmd.into(),
            speed: None,
        };
        s.control(&ctl("pause")).unwrap();
        assert_eq!(s.step().unwrap_err(), SessionError::NotRunning);
        let before = s.snapshot();
        assert_eq!(before, s.snapshot());
        s.control(&ctl("resume")).unwrap();
        s.step().unwrap();
        s.control(&ControlMessage {
            cmd: "set-speed".into(),
            speed: Some(4.0),
        })
        .unwrap();
        assert_eq!(s.speed(), Some(4.0));
        assert!(s
            .control(&ControlMessage {
                cmd: "set-speed".into(),
                speed: Some(-1.0)
            })
            .is_err());
        assert!(s.control(&ctl("jump")).is_err());
        s.control(&ctl("stop")).unwrap();
        assert_eq!(s.status(), Status::Finished);
        assert_eq!(s.control(&ctl("resume")).unwrap_err(), SessionError::Finished);
        assert_eq!(
            s.inject(&advice(Some(0), None, false)).unwrap_err(),
            SessionError::Finished
        );
        assert_eq!(s.step().unwrap_err(), SessionError::Finished);
    }

    #[test]
    fn overrides_other_than_five_rooms_dpg_are_rejected() {
        let mut req = SessionRequest::default();
        req.overrides.insert("env".into(), "two-state".into());
        assert!(matches!(Session::new(1, &req, None), Err(SessionError::Config(_))));
        let mut req = SessionRequest::default();
        req.overrides.insert("nope".into(), "1".into());
        assert!(Session::new(1, &req, None).is_err());
        let req = SessionRequest {
            speed: Some(f64::NAN),
            ..SessionRequest::default()
        };
        assert!(Session::new(1, &req, None).is_err());
    }

    #[test]
    fn runs_to_the_episode_limit() {
        let mut s = session(2);
        while s.status() == Status::Running {
            s.step().unwrap();
        }
        assert_eq!(s.status(), Status::Finished);
        assert_eq!(s.snapshot().returns.len(), 2);
        assert_eq!(s.curve_csv().lines().count(), 3);
    }
}
