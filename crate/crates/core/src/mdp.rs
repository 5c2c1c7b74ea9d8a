//! Environment contract, experience traces and the agent-environment loop.
//!
//! An episode draws from three independent random streams derived from its
//! seed: one for the environment, one for the policy and one for the advice
//! source. Adding or removing a teacher therefore never perturbs the
//! environment or the learner.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::advice::{AdviceEvent, Distribution};

/// Random generator used everywhere in the crate; its stream is stable across
/// platforms and releases.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("step called on a terminated episode")]
    StepAfterTerminal,
    #[error("action {action} out of range for {actions} actions")]
    InvalidAction { action: usize, actions: usize },
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error("returns of an empty trace")]
    EmptyTrace,
    #[error("discount {0} outside [0, 1]")]
    InvalidDiscount(f64),
    #[error("advice covers {got} actions, environment has {expected}")]
    AdviceSize { got: usize, expected: usize },
    #[error("policy failed: {0}")]
    Policy(String),
}

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
    /// Primitive time-steps consumed; more than one for macro-actions.
    pub steps: usize,
}

/// A finite MDP with discrete states and actions.
pub trait Environment {
    fn action_count(&self) -> usize;

    /// Number of discrete states.
    fn state_count(&self) -> usize;

    /// Length of [`Environment::encode`]'s output.
    fn observation_size(&self) -> usize {
        self.state_count()
    }

    fn reset(&mut self, rng: &mut SimRng) -> usize;

    /// Fails with [`MdpError::StepAfterTerminal`] once the episode has ended.
    fn step(&mut self, action: usize, rng: &mut SimRng) -> Result<Transition, MdpError>;

    fn encode(&self, state: usize) -> Vec<f64> {
        one_hot(state, self.state_count())
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn action_count(&self) -> usize {
        (**self).action_count()
    }
    fn state_count(&self) -> usize {
        (**self).state_count()
    }
    fn observation_size(&self) -> usize {
        (**self).observation_size()
    }
    fn reset(&mut self, rng: &mut SimRng) -> usize {
        (**self).reset(rng)
    }
    fn step(&mut self, action: usize, rng: &mut SimRng) -> Result<Transition, MdpError> {
        (**self).step(action, rng)
    }
    fn encode(&self, state: usize) -> Vec<f64> {
        (**self).encode(state)
    }
}

pub fn one_hot(index: usize, size: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    v[index] = 1.0;
    v
}

/// One decision of the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: usize,
    /// The encoding of `state` the policy saw.
    pub observation: Vec<f64>,
    pub action: usize,
    /// Environment reward.
    pub reward: f64,
    /// Human reward added on top of the environment reward (reward shaping).
    pub human_reward: f64,
    pub next_state: usize,
    pub done: bool,
    /// Advisory distribution in effect at this decision.
    pub advice: Distribution,
    pub advised: bool,
    /// Primitive time-steps of the transition.
    pub steps: usize,
}

impl Experience {
    /// The reward the learner optimizes.
    pub fn total_reward(&self) -> f64 {
        self.reward + self.human_reward
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub experiences: Vec<Experience>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.experiences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experiences.is_empty()
    }

    /// Undiscounted environment return.
    pub fn env_return(&self) -> f64 {
        self.experiences.iter().map(|e| e.reward).sum()
    }

    /// Primitive time-steps over the episode.
    pub fn primitive_steps(&self) -> usize {
        self.experiences.iter().map(|e| e.steps).sum()
    }

    pub fn terminated(&self) -> bool {
        self.experiences.last().is_some_and(|e| e.done)
    }

    /// One line per experience: `step,state,action,reward,done,advised`,
    /// where `reward` is the learning reward (environment plus human).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.experiences.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                e.state,
                e.action,
                e.total_reward(),
                u8::from(e.done),
                u8::from(e.advised)
            );
        }
        out
    }
}

/// Where and when a decision is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub episode: usize,
    pub step: usize,
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Advice {
    pub dist: Distribution,
    /// Whether a teacher actually intervened. Uniform advice is "no advice".
    pub given: bool,
}

impl Advice {
    pub fn none(actions: usize) -> Self {
        Self {
            dist: Distribution::uniform(actions),
            given: false,
        }
    }

    pub fn given(dist: Distribution) -> Self {
        let given = !dist.is_uniform();
        Self { dist, given }
    }
}

/// Anything that may advise an action before a decision, or reward it after.
pub trait AdviceSource {
    fn advise(&mut self, at: &Decision, actions: usize, rng: &mut SimRng) -> Advice;

    /// Extra (human) reward for the action just taken.
    fn feedback(&mut self, _at: &Decision, _action: usize, _rng: &mut SimRng) -> f64 {
        0.0
    }

    /// Budget-consuming interventions so far.
    fn interventions(&self) -> u64 {
        0
    }

    fn events(&self) -> &[AdviceEvent] {
        &[]
    }
}

impl<A: AdviceSource + ?Sized> AdviceSource for Box<A> {
    fn advise(&mut self, at: &Decision, actions: usize, rng: &mut SimRng) -> Advice {
        (**self).advise(at, actions, rng)
    }
    fn feedback(&mut self, at: &Decision, action: usize, rng: &mut SimRng) -> f64 {
        (**self).feedback(at, action, rng)
    }
    fn interventions(&self) -> u64 {
        (**self).interventions()
    }
    fn events(&self) -> &[AdviceEvent] {
        (**self).events()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoAdvice;

impl AdviceSource for NoAdvice {
    fn advise(&mut self, _at: &Decision, actions: usize, _rng: &mut SimRng) -> Advice {
        Advice::none(actions)
    }
}

/// Chooses an action given the state and the advice in effect.
pub trait Policy {
    fn choose(
        &mut self,
        state: usize,
        observation: &[f64],
        advice: &Distribution,
        rng: &mut SimRng,
    ) -> Result<usize, MdpError>;
}

impl<F> Policy for F
where
    F: FnMut(usize, &Distribution) -> usize,
{
    fn choose(
        &mut self,
        state: usize,
        _observation: &[f64],
        advice: &Distribution,
        _rng: &mut SimRng,
    ) -> Result<usize, MdpError> {
        Ok(self(state, advice))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-episode seed derived from a run seed.
pub fn episode_seed(run_seed: u64, episode: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(episode as u64))
}

/// The environment, policy and advice streams of one episode.
#[derive(Clone, Debug)]
pub struct EpisodeRngs {
    pub env: SimRng,
    pub policy: SimRng,
    pub advice: SimRng,
}

impl EpisodeRngs {
    pub fn new(seed: u64) -> Self {
        let stream = |s| {
            let mut rng = SimRng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Self {
            env: stream(0),
            policy: stream(1),
            advice: stream(2),
        }
    }
}

/// An episode in progress, advanced one decision at a time.
///
/// [`run_episode`] drives it to the end in one go; interactive hosts call
/// [`EpisodeRunner::step_with`] with advice that arrived from outside.
#[derive(Clone, Debug)]
pub struct EpisodeRunner {
    episode: usize,
    max_steps: usize,
    rngs: EpisodeRngs,
    state: usize,
    finished: bool,
    trace: EpisodeTrace,
}

impl EpisodeRunner {
    pub fn start<E: Environment + ?Sized>(
        env: &mut E,
        episode: usize,
        seed: u64,
        max_steps: usize,
    ) -> Result<Self, MdpError> {
        if max_steps == 0 {
            return Err(MdpError::ZeroMaxSteps);
        }
        let mut rngs = EpisodeRngs::new(seed);
        let state = env.reset(&mut rngs.env);
        Ok(Self {
            episode,
            max_steps,
            rngs,
            state,
            finished: false,
            trace: EpisodeTrace {
                seed,
                experiences: Vec::new(),
            },
        })
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn step_index(&self) -> usize {
        self.trace.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn decision(&self) -> Decision {
        Decision {
            episode: self.episode,
            step: self.trace.len(),
            state: self.state,
        }
    }

    /// Queries `source` for advice, takes one decision, and lets `source`
    /// reward it.
    pub fn step<E, P, A>(&mut self, env: &mut E, policy: &mut P, source: &mut A) -> Result<&Experience, MdpError>
    where
        E: Environment + ?Sized,
        P: Policy + ?Sized,
        A: AdviceSource + ?Sized,
    {
        let at = self.decision();
        let advice = source.advise(&at, env.action_count(), &mut self.rngs.advice);
        self.act(env, policy, advice, Some(source))
    }

    /// Takes one decision under externally supplied advice.
    pub fn step_with<E, P>(&mut self, env: &mut E, policy: &mut P, advice: Advice) -> Result<&Experience, MdpError>
    where
        E: Environment + ?Sized,
        P: Policy + ?Sized,
    {
        self.act::<E, P, NoAdvice>(env, policy, advice, None)
    }

    fn act<E, P, A>(
        &mut self,
        env: &mut E,
        policy: &mut P,
        advice: Advice,
        source: Option<&mut A>,
    ) -> Result<&Experience, MdpError>
    where
        E: Environment + ?Sized,
        P: Policy + ?Sized,
        A: AdviceSource + ?Sized,
    {
        if self.finished {
            return Err(MdpError::StepAfterTerminal);
        }
        let actions = env.action_count();
        if advice.dist.len() != actions {
            return Err(MdpError::AdviceSize {
                got: advice.dist.len(),
                expected: actions,
            });
        }
        let at = self.decision();
        let observation = env.encode(self.state);
        let action = policy.choose(self.state, &observation, &advice.dist, &mut self.rngs.policy)?;
        if action >= actions {
            return Err(MdpError::InvalidAction { action, actions });
        }
        let human_reward = match source {
            Some(s) => s.feedback(&at, action, &mut self.rngs.advice),
            None => 0.0,
        };
        let t = env.step(action, &mut self.rngs.env)?;
        self.trace.experiences.push(Experience {
            state: self.state,
            observation,
            action,
            reward: t.reward,
            human_reward,
            next_state: t.next_state,
            done: t.done,
            advice: advice.dist,
            advised: advice.given,
            steps: t.steps,
        });
        self.state = t.next_state;
        self.finished = t.done || self.trace.len() >= self.max_steps;
        Ok(self.trace.experiences.last().expect("just pushed"))
    }

    pub fn finish(self) -> EpisodeTrace {
        self.trace
    }
}

/// Runs one episode: reset, then advice → policy → environment until the
/// episode terminates or `max_steps` decisions were taken.
pub fn run_episode<E, P, A>(
    env: &mut E,
    policy: &mut P,
    advice_source: &mut A,
    max_steps: usize,
    seed: u64,
) -> Result<EpisodeTrace, MdpError>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    A: AdviceSource + ?Sized,
{
    run_episode_at(env, policy, advice_source, max_steps, 0, seed)
}

/// [`run_episode`] with an explicit episode index for the advice log.
pub fn run_episode_at<E, P, A>(
    env: &mut E,
    policy: &mut P,
    advice_source: &mut A,
    max_steps: usize,
    episode: usize,
    seed: u64,
) -> Result<EpisodeTrace, MdpError>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
    A: AdviceSource + ?Sized,
{
    let mut runner = EpisodeRunner::start(env, episode, seed, max_steps)?;
    while !runner.is_finished() {
        runner.step(env, policy, advice_source)?;
    }
    Ok(runner.finish())
}

/// Suffix-discounted sums `R_t = r_t + γ R_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>, MdpError> {
    if rewards.is_empty() {
        return Err(MdpError::EmptyTrace);
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(MdpError::InvalidDiscount(gamma));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    Ok(out)
}

/// Returns of a trace over the learning reward (environment plus human reward).
pub fn returns(trace: &EpisodeTrace, gamma: f64) -> Result<Vec<f64>, MdpError> {
    let rewards: Vec<f64> = trace.experiences.iter().map(Experience::total_reward).collect();
    discounted_returns(&rewards, gamma)
}
