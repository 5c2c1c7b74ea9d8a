use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rayon::prelude::*;

use super::{AdvisorConfig, AgentKind, CurveRow, EnvId, ExperimentConfig, HarnessError, LearningCurve};
use crate::advice::{AdviceEvent, AdviceLog, Distribution, FixedAdvice, ForcedAdvice, RewardShaper, Teacher};
use crate::agents::{AgentError, DpgAgent, Learner, TabularAgent, TabularKind};
use crate::envs::{canonical_map, AdviceBandit, FiveRoomsEnv, GridMap, StateEncoding, TwoStateEnv};
use crate::mdp::{
    episode_seed, Advice, AdviceSource, Decision, Environment, EpisodeRunner, Experience, MdpError, NoAdvice, Policy,
    SimRng,
};

pub type BoxedEnv = Box<dyn Environment + Send>;
pub type BoxedAdvisor = Box<dyn AdviceSource + Send>;

fn shared_map() -> Arc<GridMap> {
    static MAP: OnceLock<Arc<GridMap>> = OnceLock::new();
    MAP.get_or_init(|| Arc::new(canonical_map())).clone()
}

/// `(states, actions)` of an environment.
pub(crate) fn env_dims(env: EnvId) -> (usize, usize) {
    let e = build_env(env, StateEncoding::default());
    (e.state_count(), e.action_count())
}

pub fn build_env(env: EnvId, encoding: StateEncoding) -> BoxedEnv {
    match env {
        EnvId::FiveRooms => Box::new(FiveRoomsEnv::with_encoding(shared_map(), encoding)),
        EnvId::TwoState => Box::new(TwoStateEnv::new()),
        EnvId::Bandit => Box::new(AdviceBandit::new()),
    }
}

/// Silences an advisor before a given episode.
struct Gated {
    inner: BoxedAdvisor,
    from: usize,
}

impl AdviceSource for Gated {
    fn advise(&mut self, at: &Decision, actions: usize, rng: &mut SimRng) -> Advice {
        if at.episode < self.from {
            Advice::none(actions)
        } else {
            self.inner.advise(at, actions, rng)
        }
    }

    fn feedback(&mut self, at: &Decision, action: usize, rng: &mut SimRng) -> f64 {
        if at.episode < self.from {
            0.0
        } else {
            self.inner.feedback(at, action, rng)
        }
    }

    fn interventions(&self) -> u64 {
        self.inner.interventions()
    }

    fn events(&self) -> &[AdviceEvent] {
        self.inner.events()
    }
}

pub fn build_advisor(cfg: &ExperimentConfig) -> Result<BoxedAdvisor, HarnessError> {
    let inner: BoxedAdvisor = match &cfg.advisor {
        AdvisorConfig::None => Box::new(NoAdvice),
        AdvisorConfig::Teacher(t) => Box::new(Teacher::new(t.clone(), shared_map())?),
        AdvisorConfig::Shaper(s) => Box::new(RewardShaper::new(s.clone(), shared_map())?),
        AdvisorConfig::Forced { state, action } => Box::new(ForcedAdvice::new(*state, *action)),
        AdvisorConfig::Fixed(d) => Box::new(FixedAdvice::new(d.clone())),
    };
    if cfg.advice_from == 0 {
        Ok(inner)
    } else {
        Ok(Box::new(Gated {
            inner,
            from: cfg.advice_from,
        }))
    }
}

/// Any of the harness learners.
#[derive(Clone, Debug)]
pub enum AnyLearner {
    Dpg(DpgAgent),
    Tabular(TabularAgent),
}

impl AnyLearner {
    pub fn as_dpg(&self) -> Option<&DpgAgent> {
        match self {
            AnyLearner::Dpg(a) => Some(a),
            AnyLearner::Tabular(_) => None,
        }
    }

    pub fn as_tabular(&self) -> Option<&TabularAgent> {
        match self {
            AnyLearner::Tabular(a) => Some(a),
            AnyLearner::Dpg(_) => None,
        }
    }
}

impl Policy for AnyLearner {
    fn choose(
        &mut self,
        state: usize,
        observation: &[f64],
        advice: &Distribution,
        rng: &mut SimRng,
    ) -> Result<usize, MdpError> {
        match self {
            AnyLearner::Dpg(a) => a.choose(state, observation, advice, rng),
            AnyLearner::Tabular(a) => a.choose(state, observation, advice, rng),
        }
    }
}

impl Learner for AnyLearner {
    fn end_episode(&mut self, trace: crate::mdp::EpisodeTrace) -> Result<(), AgentError> {
        match self {
            AnyLearner::Dpg(a) => a.end_episode(trace),
            AnyLearner::Tabular(a) => a.end_episode(trace),
        }
    }

    fn policy_at(&self, state: usize, observation: &[f64]) -> Result<Distribution, AgentError> {
        match self {
            AnyLearner::Dpg(a) => a.policy_at(state, observation),
            AnyLearner::Tabular(a) => a.policy_at(state, observation),
        }
    }
}

/// Stream of the run seed reserved for parameter initialization.
const INIT_STREAM: u64 = 3;

pub fn build_learner(cfg: &ExperimentConfig, seed: u64) -> Result<AnyLearner, HarnessError> {
    let env = build_env(cfg.env, cfg.encoding);
    let (states, actions) = (env.state_count(), env.action_count());
    Ok(match cfg.agent {
        AgentKind::Dpg => {
            let mut rng = SimRng::seed_from_u64(seed);
            rng.set_stream(INIT_STREAM);
            AnyLearner::Dpg(DpgAgent::new(env.observation_size(), actions, cfg.dpg, &mut rng)?)
        }
        AgentKind::QLearning => {
            AnyLearner::Tabular(TabularAgent::new(TabularKind::QLearning, states, actions, cfg.tabular)?)
        }
        AgentKind::Sarsa => AnyLearner::Tabular(TabularAgent::new(TabularKind::Sarsa, states, actions, cfg.tabular)?),
    })
}

/// What one decision did.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionOutcome {
    pub experience: Experience,
    /// The curve row of the episode this decision ended, if it did.
    pub finished_episode: Option<CurveRow>,
}

/// A training run of one seed, advanced one decision at a time.
///
/// The batch harness drives it to the end; the live service interleaves
/// decisions with externally injected advice.
pub struct TrainingRun<L> {
    seed: u64,
    env: BoxedEnv,
    learner: L,
    advisor: BoxedAdvisor,
    episodes: usize,
    max_decisions: usize,
    episode: usize,
    runner: EpisodeRunner,
    rows: Vec<CurveRow>,
}

impl<L: Learner> TrainingRun<L> {
    pub fn new(
        seed: u64,
        mut env: BoxedEnv,
        learner: L,
        advisor: BoxedAdvisor,
        episodes: usize,
        max_decisions: usize,
    ) -> Result<Self, HarnessError> {
        if episodes == 0 {
            return Err(HarnessError::Config("episodes must be at least 1".into()));
        }
        let runner = EpisodeRunner::start(env.as_mut(), 0, episode_seed(seed, 0), max_decisions)?;
        Ok(Self {
            seed,
            env,
            learner,
            advisor,
            episodes,
            max_decisions,
            episode: 0,
            runner,
            rows: Vec::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Current episode index; equals the episode count once finished.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    /// Decisions taken so far in the current episode.
    pub fn step(&self) -> usize {
        self.runner.step_index()
    }

    /// The agent's current state.
    pub fn state(&self) -> usize {
        self.runner.state()
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.episodes
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    pub fn env(&self) -> &(dyn Environment + Send) {
        self.env.as_ref()
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn events(&self) -> &[AdviceEvent] {
        self.advisor.events()
    }

    pub fn interventions(&self) -> u64 {
        self.advisor.interventions()
    }

    /// Takes one decision. With `advice` the simulated advisor is bypassed
    /// for this decision; otherwise it is queried as usual.
    pub fn decide(&mut self, advice: Option<Advice>) -> Result<DecisionOutcome, HarnessError> {
        if self.is_finished() {
            return Err(MdpError::StepAfterTerminal.into());
        }
        let experience = match advice {
            Some(a) => self.runner.step_with(self.env.as_mut(), &mut self.learner, a)?,
            None => self
                .runner
                .step(self.env.as_mut(), &mut self.learner, self.advisor.as_mut())?,
        }
        .clone();
        let finished_episode = if self.runner.is_finished() {
            Some(self.close_episode()?)
        } else {
            None
        };
        Ok(DecisionOutcome {
            experience,
            finished_episode,
        })
    }

    fn close_episode(&mut self) -> Result<CurveRow, HarnessError> {
        let next = self.episode + 1;
        let fresh = EpisodeRunner::start(
            self.env.as_mut(),
            next,
            episode_seed(self.seed, next),
            self.max_decisions,
        )?;
        let trace = std::mem::replace(&mut self.runner, fresh).finish();
        let row = CurveRow {
            seed: self.seed,
            episode: self.episode,
            ret: trace.env_return(),
            steps: trace.primitive_steps(),
            interventions: self.advisor.interventions(),
        };
        self.learner.end_episode(trace)?;
        self.rows.push(row.clone());
        self.episode = next;
        Ok(row)
    }

    pub fn run_episode(&mut self) -> Result<CurveRow, HarnessError> {
        loop {
            if let Some(row) = self.decide(None)?.finished_episode {
                return Ok(row);
            }
        }
    }

    pub fn run_to_end(&mut self) -> Result<(), HarnessError> {
        while !self.is_finished() {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (L, Vec<CurveRow>, AdviceLog) {
        let log = self.advisor.events().to_vec();
        (self.learner, self.rows, log)
    }
}

/// Everything one seed produced.
#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub rows: Vec<CurveRow>,
    pub log: AdviceLog,
    pub learner: AnyLearner,
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult, HarnessError> {
    cfg.validate()?;
    let mut run = TrainingRun::new(
        seed,
        build_env(cfg.env, cfg.encoding),
        build_learner(cfg, seed)?,
        build_advisor(cfg)?,
        cfg.episodes,
        cfg.max_decisions,
    )?;
    run.run_to_end()?;
    let (learner, rows, log) = run.into_parts();
    Ok(SeedResult {
        seed,
        rows,
        log,
        learner,
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub curve: LearningCurve,
    pub seeds: Vec<SeedResult>,
}

/// Trains every seed from scratch, in parallel. Rows come out in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let seeds: Vec<SeedResult> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed))
        .collect::<Result<_, _>>()?;
    let curve = LearningCurve {
        rows: seeds.iter().flat_map(|s| s.rows.iter().cloned()).collect(),
    };
    Ok(ExperimentResult { curve, seeds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_has_a_row_per_seed_and_episode() {
        let mut cfg = ExperimentConfig::scenario("twostate-q-forced").unwrap();
        cfg.episodes = 30;
        cfg.seeds = vec![5, 1];
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.curve.rows.len(), 60);
        assert_eq!(res.curve.rows[0].seed, 5);
        assert_eq!(res.curve.rows[30].seed, 1);
        assert_eq!(res.curve.rows[29].episode, 29);
    }

    #[test]
    fn warmup_silences_the_advisor() {
        let mut cfg = ExperimentConfig::scenario("twostate-sarsa-forced").unwrap();
        cfg.episodes = 50;
        cfg.advice_from = 50;
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.curve.max_interventions(), 0);
        cfg.advice_from = 0;
        let res = run_experiment(&cfg).unwrap();
        assert!(res.curve.max_interventions() > 0);
    }

    #[test]
    fn advisor_restricted_to_five_rooms() {
        let mut cfg = ExperimentConfig::scenario("dpg-advice").unwrap();
        cfg.env = EnvId::TwoState;
        assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
    }
}
