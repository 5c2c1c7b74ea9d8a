//! Learners: tabular Q-Learning and SARSA, and the DPG agent.
//!
//! All of them take advice the same way, through the distribution handed to
//! [`Policy::choose`](crate::mdp::Policy::choose).

mod dpg;
mod tabular;

pub use dpg::{DpgAgent, DpgConfig};
pub use tabular::{Exploration, QTable, TabularAgent, TabularConfig, TabularKind};

use thiserror::Error;

use crate::advice::{AdviceError, Distribution};
use crate::mdp::{EpisodeTrace, MdpError, Policy};
use crate::numerics::NumericsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Advice(#[from] AdviceError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("invalid agent config: {0}")]
    Config(String),
}

/// A policy that learns from finished episodes.
pub trait Learner: Policy {
    fn end_episode(&mut self, trace: EpisodeTrace) -> Result<(), AgentError>;

    /// The learner's own action distribution at `state` (encoded as
    /// `observation`), without advice.
    fn policy_at(&self, state: usize, observation: &[f64]) -> Result<Distribution, AgentError>;
}
