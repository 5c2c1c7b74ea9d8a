//! Advisory policies and the ways they reach a learner.
//!
//! Policy shaping multiplies the learner's distribution with an advisory one
//! and renormalizes ([`mix_policies`]). The simulated [`Teacher`] produces such
//! advice for Five Rooms; the [`RewardShaper`] is the reward-based baseline that
//! adds a human reward to the environment reward instead.

mod distribution;
mod log;
mod shaping;
mod teacher;

pub use distribution::{Distribution, SUM_TOLERANCE};
pub use log::{count_interventions, AdviceEvent, AdviceLog, EventKind};
pub use shaping::{RewardShaper, RewardShaperConfig};
pub use teacher::{AdviceMode, Teacher, TeacherConfig};

use thiserror::Error;

use crate::mdp::{Advice, AdviceSource, Decision, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdviceError {
    #[error("distribution has no entries")]
    Empty,
    #[error("entry {index} is {value}, expected a finite non-negative probability")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("weights have zero total mass")]
    ZeroMass,
    #[error("cannot mix distributions over {left} and {right} actions")]
    LengthMismatch { left: usize, right: usize },
    #[error("contradictory advice: the advised actions have zero probability under the learner")]
    Contradictory,
    #[error("invalid config: {0}")]
    Config(String),
}

/// Policy-shaping mixture: the normalized element-wise product of the two policies.
///
/// Fails only when the product carries no mass at all, which happens when the
/// advice is concentrated on actions the learner rules out exactly.
pub fn mix_policies(learned: &Distribution, advice: &Distribution) -> Result<Distribution, AdviceError> {
    if learned.len() != advice.len() {
        return Err(AdviceError::LengthMismatch {
            left: learned.len(),
            right: advice.len(),
        });
    }
    let product: Vec<f64> = learned.probs().iter().zip(advice.probs()).map(|(l, h)| l * h).collect();
    let total: f64 = product.iter().sum();
    if !(total > 0.0) {
        return Err(AdviceError::Contradictory);
    }
    // An exact one-hot stays exact.
    Ok(Distribution::from_weights(product).expect("product of distributions is non-negative"))
}

/// Always advises `action` in `state`, nothing elsewhere.
///
/// This is the phony deterministic advice of the two-state counterexample.
#[derive(Clone, Debug)]
pub struct ForcedAdvice {
    pub state: usize,
    pub action: usize,
    given: u64,
}

impl ForcedAdvice {
    pub fn new(state: usize, action: usize) -> Self {
        Self {
            state,
            action,
            given: 0,
        }
    }
}

impl AdviceSource for ForcedAdvice {
    fn advise(&mut self, at: &Decision, actions: usize, _rng: &mut SimRng) -> Advice {
        if at.state == self.state {
            self.given += 1;
            Advice::given(Distribution::one_hot(actions, self.action))
        } else {
            Advice::none(actions)
        }
    }

    fn interventions(&self) -> u64 {
        self.given
    }
}

/// The same advisory distribution at every decision.
#[derive(Clone, Debug)]
pub struct FixedAdvice {
    dist: Distribution,
    given: u64,
}

impl FixedAdvice {
    pub fn new(dist: Distribution) -> Self {
        Self { dist, given: 0 }
    }
}

impl AdviceSource for FixedAdvice {
    fn advise(&mut self, _at: &Decision, actions: usize, _rng: &mut SimRng) -> Advice {
        assert_eq!(
            actions,
            self.dist.len(),
            "fixed advice sized for a different action set"
        );
        if self.dist.is_uniform() {
            return Advice::none(actions);
        }
        self.given += 1;
        Advice::given(self.dist.clone())
    }

    fn interventions(&self) -> u64 {
        self.given
    }
}
