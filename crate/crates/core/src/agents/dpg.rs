use super::{AgentError, Learner};
use crate::advice::Distribution;
use crate::mdp::{returns, EpisodeTrace, MdpError, Policy, SimRng};
use crate::numerics::{
    accumulate_gradient, adam_step, AdamConfig, AdamState, Checkpoint, Gradients, NetShape, PolicyNet,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpgConfig {
    pub hidden: usize,
    pub adam: AdamConfig,
    /// Episodes per gradient update.
    pub epoch_size: usize,
    pub gamma: f64,
}

impl Default for DpgConfig {
    fn default() -> Self {
        Self {
            hidden: NetShape::DEFAULT_HIDDEN,
            adam: AdamConfig::default(),
            epoch_size: 10,
            gamma: 1.0,
        }
    }
}

impl DpgConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.hidden == 0 || self.epoch_size == 0 {
            return Err(AgentError::Config("hidden size and epoch size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        let a = self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite())
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.eps > 0.0)
        {
            return Err(AgentError::Config(format!("bad optimizer settings {a:?}")));
        }
        Ok(())
    }
}

/// Policy-gradient learner over the advice-gated network.
///
/// Observations have `input` entries. Finished episodes are
/// buffered; each `epoch_size` episodes the summed REINFORCE gradient,
/// averaged over the epoch, is applied with Adam.
#[derive(Clone, Debug)]
pub struct DpgAgent {
    net: PolicyNet,
    adam: AdamState,
    config: DpgConfig,
    buffer: Vec<EpisodeTrace>,
    episodes: u64,
    updates: u64,
    last_loss: Option<f64>,
}

impl DpgAgent {
    pub fn new(input: usize, actions: usize, config: DpgConfig, rng: &mut SimRng) -> Result<Self, AgentError> {
        config.validate()?;
        let shape = NetShape::new(input, config.hidden, actions);
        Ok(Self {
            net: PolicyNet::new(shape, rng),
            adam: AdamState::new(&shape, config.adam),
            config,
            buffer: Vec::new(),
            episodes: 0,
            updates: 0,
            last_loss: None,
        })
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }

    pub fn config(&self) -> &DpgConfig {
        &self.config
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Samples an action under the gated network output.
    pub fn act(&self, observation: &[f64], advice: &Distribution, rng: &mut SimRng) -> Result<usize, AgentError> {
        Ok(self.net.forward(observation, advice)?.distribution().sample(rng))
    }

    /// The learned policy at an encoded observation (uniform advice).
    pub fn policy(&self, observation: &[f64]) -> Result<Distribution, AgentError> {
        Ok(self.net.learned_policy(observation)?)
    }

    /// Buffers a finished episode and trains once the epoch is full.
    pub fn observe(&mut self, trace: EpisodeTrace) -> Result<(), AgentError> {
        self.episodes += 1;
        if !trace.is_empty() {
            self.buffer.push(trace);
        }
        if self.episodes.is_multiple_of(self.config.epoch_size as u64) {
            self.train_epoch()?;
        }
        Ok(())
    }

    /// One Adam step on the buffered episodes. An empty buffer is a no-op.
    /// The buffer is cleared even when the update is rejected.
    pub fn train_epoch(&mut self) -> Result<Option<f64>, AgentError> {
        if self.buffer.is_empty() {
            log::warn!("training epoch with no buffered episodes skipped");
            return Ok(None);
        }
        let buffer = std::mem::take(&mut self.buffer);
        let mut grads = Gradients::zeros(self.net.shape());
        let mut loss = 0.0;
        for trace in &buffer {
            let rets = returns(trace, self.config.gamma)?;
            loss += accumulate_gradient(&self.net, trace, &rets, &mut grads)?;
        }
        let scale = 1.0 / buffer.len() as f64;
        grads.iter_mut().for_each(|g| *g *= scale);
        loss *= scale;
        adam_step(&mut self.net, &grads, &mut self.adam)?;
        self.updates += 1;
        self.last_loss = Some(loss);
        log::debug!("update {} over {} episodes, loss {loss:.4}", self.updates, buffer.len());
        Ok(Some(loss))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.net.clone(),
            adam: Some(self.adam.clone()),
            meta: vec![
                ("kind".into(), "dpg".into()),
                ("gamma".into(), self.config.gamma.to_string()),
                ("epoch_size".into(), self.config.epoch_size.to_string()),
                ("episodes".into(), self.episodes.to_string()),
            ],
        }
    }

    /// Restores an agent; the buffer starts empty.
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, AgentError> {
        if ck.meta("kind").is_some_and(|k| k != "dpg") {
            return Err(AgentError::Config("checkpoint is not a dpg agent".into()));
        }
        let parse = |key: &str| -> Result<Option<f64>, AgentError> {
            ck.meta(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| AgentError::Config(format!("bad {key} {v:?}")))
                })
                .transpose()
        };
        let defaults = DpgConfig::default();
        let shape = *ck.net.shape();
        let adam = ck.adam.clone().unwrap_or_else(|| AdamState::new(&shape, defaults.adam));
        let config = DpgConfig {
            hidden: shape.hidden,
            adam: adam.config,
            epoch_size: parse("epoch_size")?.map_or(defaults.epoch_size, |v| v as usize),
            gamma: parse("gamma")?.unwrap_or(defaults.gamma),
        };
        config.validate()?;
        let episodes = parse("episodes")?.map_or(0, |v| v as u64);
        Ok(Self {
            net: ck.net,
            adam,
            config,
            buffer: Vec::new(),
            episodes,
            updates: 0,
            last_loss: None,
        })
    }
}

impl Policy for DpgAgent {
    fn choose(
        &mut self,
        _state: usize,
        observation: &[f64],
        advice: &Distribution,
        rng: &mut SimRng,
    ) -> Result<usize, MdpError> {
        self.act(observation, advice, rng)
            .map_err(|e| MdpError::Policy(e.to_string()))
    }
}

impl Learner for DpgAgent {
    fn end_episode(&mut self, trace: EpisodeTrace) -> Result<(), AgentError> {
        self.observe(trace)
    }

    fn policy_at(&self, _state: usize, observation: &[f64]) -> Result<Distribution, AgentError> {
        self.policy(observation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::AdviceBandit;
    use crate::mdp::{run_episode, NoAdvice};
    use crate::numerics::{read_checkpoint, write_checkpoint};
    use rand::SeedableRng;

    fn agent(lr: f64, epoch: usize) -> DpgAgent {
        let mut rng = SimRng::seed_from_u64(3);
        let config = DpgConfig {
            hidden: 8,
            adam: AdamConfig::with_lr(lr),
            epoch_size: epoch,
            gamma: 1.0,
        };
        DpgAgent::new(1, 2, config, &mut rng).unwrap()
    }

    #[test]
    fn learns_the_bandit() {
        let mut a = agent(0.05, 5);
        let mut env = AdviceBandit::new();
        for ep in 0..400 {
            let trace = run_episode(&mut env, &mut a, &mut NoAdvice, 10, ep).unwrap();
            a.end_episode(trace).unwrap();
        }
        assert_eq!(a.updates(), 80);
        assert!(a.policy_at(0, &[1.0]).unwrap().prob(0) > 0.95);
    }

    #[test]
    fn empty_epoch_is_a_noop() {
        let mut a = agent(0.01, 1);
        let before = a.net().clone();
        assert_eq!(a.train_epoch().unwrap(), None);
        assert_eq!(a.net(), &before);
        assert_eq!(a.updates(), 0);
    }

    #[test]
    fn checkpoint_restores_agent() {
        let mut a = agent(0.05, 2);
        let mut env = AdviceBandit::new();
        for ep in 0..6 {
            let trace = run_episode(&mut env, &mut a, &mut NoAdvice, 10, ep).unwrap();
            a.end_episode(trace).unwrap();
        }
        let mut buf = Vec::new();
        write_checkpoint(&a.checkpoint(), &mut buf).unwrap();
        let b = DpgAgent::from_checkpoint(read_checkpoint(std::str::from_utf8(&buf).unwrap()).unwrap()).unwrap();
        assert_eq!(b.net(), a.net());
        assert_eq!(b.episodes(), 6);
        assert_eq!(b.config(), a.config());
    }

    #[test]
    fn rejects_bad_config() {
        let mut rng = SimRng::seed_from_u64(0);
        let bad = DpgConfig {
            epoch_size: 0,
            ..Default::default()
        };
        assert!(DpgAgent::new(2, 2, bad, &mut rng).is_err());
    }
}
