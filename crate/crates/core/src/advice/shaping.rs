use std::sync::Arc;

use rand::Rng;

use super::{AdviceError, AdviceEvent, AdviceLog, EventKind};
use crate::envs::{optimal_macro, GridMap, Macro};
use crate::mdp::{Advice, AdviceSource, Decision, SimRng};

/// Reward-shaping teacher: judges the chosen macro against the optimal one.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardShaperConfig {
    pub punishment: f64,
    pub correct_reward: f64,
    /// Probability of watching a given decision.
    pub availability: f64,
    /// Maximum number of punishments. Correct-action rewards are free.
    pub budget: Option<u64>,
}

impl Default for RewardShaperConfig {
    fn default() -> Self {
        Self {
            punishment: -5.0,
            correct_reward: 0.0,
            availability: 0.05,
            budget: None,
        }
    }
}

impl RewardShaperConfig {
    pub fn validate(&self) -> Result<(), AdviceError> {
        if !(0.0..=1.0).contains(&self.availability) {
            return Err(AdviceError::Config(format!(
                "availability must be in [0, 1], got {}",
                self.availability
            )));
        }
        if !self.punishment.is_finite() || !self.correct_reward.is_finite() {
            return Err(AdviceError::Config("shaping rewards must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RewardShaper {
    config: RewardShaperConfig,
    map: Arc<GridMap>,
    remaining: Option<u64>,
    punishments: u64,
    log: AdviceLog,
}

impl RewardShaper {
    pub fn new(config: RewardShaperConfig, map: Arc<GridMap>) -> Result<Self, AdviceError> {
        config.validate()?;
        Ok(Self {
            remaining: config.budget,
            config,
            map,
            punishments: 0,
            log: AdviceLog::new(),
        })
    }

    pub fn config(&self) -> &RewardShaperConfig {
        &self.config
    }

    pub fn remaining(&self) -> Option<u64> {
        self.remaining
    }

    pub fn punishments(&self) -> u64 {
        self.punishments
    }

    pub fn log(&self) -> &AdviceLog {
        &self.log
    }

    /// Human reward for taking `action` at cell `at.state`.
    pub fn shape_reward(&mut self, at: &Decision, action: usize, rng: &mut SimRng) -> f64 {
        let watching = rng.random::<f64>() < self.config.availability;
        if !watching || self.remaining == Some(0) {
            return 0.0;
        }
        let value = if action == optimal_macro(&self.map, at.state).id() {
            self.config.correct_reward
        } else {
            if let Some(r) = self.remaining.as_mut() {
                *r -= 1;
            }
            self.punishments += 1;
            self.config.punishment
        };
        self.log.push(AdviceEvent {
            episode: at.episode,
            step: at.step,
            kind: EventKind::Reward { value },
            remaining: self.remaining,
        });
        value
    }
}

impl AdviceSource for RewardShaper {
    fn advise(&mut self, _at: &Decision, actions: usize, _rng: &mut SimRng) -> Advice {
        Advice::none(actions)
    }

    fn feedback(&mut self, at: &Decision, action: usize, rng: &mut SimRng) -> f64 {
        debug_assert!(action < Macro::COUNT);
        self.shape_reward(at, action, rng)
    }

    /// Budget-consuming interventions, i.e. punishments.
    fn interventions(&self) -> u64 {
        self.punishments
    }

    fn events(&self) -> &[AdviceEvent] {
        &self.log
    }
}
