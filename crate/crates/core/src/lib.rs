//! Directed Policy Gradient (DPG) workbench.
//!
//! A policy-gradient learner whose output is gated element-wise by an
//! advisory distribution before normalization, so that a teacher (or a backup
//! policy) can override the actions the agent executes while the agent keeps
//! learning on-policy. The crate also ships the tabular Q-Learning / SARSA
//! baselines, three small environments (a two-state counterexample, a one-state
//! bandit and the 29x27 Five Rooms gridworld with macro-actions), simulated
//! teachers, and a seeded experiment harness that writes learning curves as CSV.
//!
//! Module map:
//!
//! - [`numerics`]: the two-layer advice-gated network, its analytic gradient and Adam.
//! - [`mdp`]: environment contract, experience traces, episode runner, returns.
//! - [`envs`]: the three environments and the Five Rooms map loader.
//! - [`agents`]: Q-Learning, SARSA and the DPG agent.
//! - [`advice`]: distributions, policy mixing, simulated teacher and reward shaper.
//! - [`harness`]: experiment configs, scenario presets, runs, CSV and summaries.

pub mod advice;
pub mod agents;
pub mod envs;
pub mod harness;
pub mod mdp;
pub mod numerics;

pub use advice::{mix_policies, Distribution};
pub use mdp::{run_episode, Environment, EpisodeTrace, Experience};
