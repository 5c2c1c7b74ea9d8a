use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::advice::{AdviceMode, Distribution, RewardShaperConfig, TeacherConfig};
use crate::agents::{DpgConfig, Exploration, TabularConfig};
use crate::envs::{StateEncoding, TwoStateEnv};
use crate::numerics::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvId {
    FiveRooms,
    TwoState,
    Bandit,
}

impl EnvId {
    pub const ALL: [EnvId; 3] = [EnvId::FiveRooms, EnvId::TwoState, EnvId::Bandit];

    pub fn name(self) -> &'static str {
        match self {
            EnvId::FiveRooms => "five-rooms",
            EnvId::TwoState => "two-state",
            EnvId::Bandit => "bandit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Dpg,
    QLearning,
    Sarsa,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Dpg, AgentKind::QLearning, AgentKind::Sarsa];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dpg => "dpg",
            AgentKind::QLearning => "q-learning",
            AgentKind::Sarsa => "sarsa",
        }
    }
}

fn parse_named<T: Copy>(
    value: &str,
    all: &[T],
    name: impl Fn(T) -> &'static str,
    what: &str,
) -> Result<T, HarnessError> {
    all.iter().copied().find(|&x| name(x) == value).ok_or_else(|| {
        let valid: Vec<&str> = all.iter().map(|&x| name(x)).collect();
        HarnessError::Config(format!(
            "unknown {what} {value:?}, expected one of: {}",
            valid.join(", ")
        ))
    })
}

impl FromStr for EnvId {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_named(s, &EnvId::ALL, EnvId::name, "environment")
    }
}

impl FromStr for AgentKind {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_named(s, &AgentKind::ALL, AgentKind::name, "agent")
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Who advises or rewards the agent.
#[derive(Clone, Debug, PartialEq)]
pub enum AdvisorConfig {
    None,
    /// Simulated Five Rooms teacher.
    Teacher(TeacherConfig),
    /// Reward-shaping Five Rooms teacher.
    Shaper(RewardShaperConfig),
    /// One-hot advice on `action` whenever the agent is in `state`.
    Forced {
        state: usize,
        action: usize,
    },
    /// The same distribution at every decision.
    Fixed(Distribution),
}

impl AdvisorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AdvisorConfig::None => "none",
            AdvisorConfig::Teacher(_) => "teacher",
            AdvisorConfig::Shaper(_) => "shaper",
            AdvisorConfig::Forced { .. } => "forced",
            AdvisorConfig::Fixed(_) => "fixed",
        }
    }

    /// Configured intervention budget, if any.
    pub fn budget(&self) -> Option<u64> {
        match self {
            AdvisorConfig::Teacher(t) => t.budget,
            AdvisorConfig::Shaper(s) => s.budget,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvId,
    pub agent: AgentKind,
    pub advisor: AdvisorConfig,
    /// Episodes before this index run without advice.
    pub advice_from: usize,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Decision cap per episode.
    pub max_decisions: usize,
    /// Five Rooms observation encoding.
    pub encoding: StateEncoding,
    pub dpg: DpgConfig,
    pub tabular: TabularConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            env: EnvId::FiveRooms,
            agent: AgentKind::Dpg,
            advisor: AdvisorConfig::None,
            advice_from: 0,
            episodes: 1000,
            seeds: (0..8).collect(),
            max_decisions: 500,
            encoding: StateEncoding::default(),
            dpg: DpgConfig::default(),
            tabular: TabularConfig::default(),
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value {value:?} for {key}")))
}

fn parse_budget(value: &str) -> Result<Option<u64>, HarnessError> {
    match value {
        "none" | "" => Ok(None),
        v => parse("budget", v).map(Some),
    }
}

pub const SETTABLE_KEYS: &[&str] = &[
    "env",
    "agent",
    "advisor",
    "episodes",
    "seeds",
    "advice_from",
    "max_decisions",
    "encoding",
    "lr",
    "epoch_size",
    "hidden",
    "gamma",
    "alpha",
    "epsilon",
    "exploration",
    "availability",
    "p_right",
    "budget",
    "advice_mode",
    "mass",
    "punishment",
    "correct_reward",
    "forced_state",
    "forced_action",
    "out",
];

impl ExperimentConfig {
    /// A catalog preset by name.
    pub fn scenario(name: &str) -> Result<Self, HarnessError> {
        let catalog = scenario_catalog();
        match catalog.iter().find(|s| s.name == name) {
            Some(s) => Ok(s.config.clone()),
            None => {
                let names: Vec<&str> = catalog.iter().map(|s| s.name).collect();
                Err(HarnessError::Config(format!(
                    "unknown scenario {name:?}, valid scenarios: {}",
                    names.join(", ")
                )))
            }
        }
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key {
            "env" => self.env = value.parse()?,
            "agent" => self.agent = value.parse()?,
            "advisor" => {
                self.advisor = match value {
                    "none" => AdvisorConfig::None,
                    "teacher" => AdvisorConfig::Teacher(TeacherConfig::default()),
                    "shaper" => AdvisorConfig::Shaper(RewardShaperConfig::default()),
                    "forced" => AdvisorConfig::Forced {
                        state: TwoStateEnv::S2,
                        action: TwoStateEnv::A2,
                    },
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "unknown advisor {value:?}, expected none, teacher, shaper or forced"
                        )))
                    }
                }
            }
            "episodes" => self.episodes = parse(key, value)?,
            "seeds" => {
                self.seeds = if value.contains(',') {
                    value.split(',').map(|s| parse(key, s)).collect::<Result<_, _>>()?
                } else {
                    (0..parse::<u64>(key, value)?).collect()
                }
            }
            "advice_from" => self.advice_from = parse(key, value)?,
            "max_decisions" => self.max_decisions = parse(key, value)?,
            "encoding" => {
                self.encoding = match value {
                    "cell" => StateEncoding::Cell,
                    "rowcol" => StateEncoding::RowCol,
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "encoding must be cell or rowcol, got {value:?}"
                        )))
                    }
                }
            }
            "lr" => self.dpg.adam.lr = parse(key, value)?,
            "epoch_size" => self.dpg.epoch_size = parse(key, value)?,
            "hidden" => self.dpg.hidden = parse(key, value)?,
            "gamma" => {
                let g = parse(key, value)?;
                self.dpg.gamma = g;
                self.tabular.gamma = g;
            }
            "alpha" => self.tabular.alpha = parse(key, value)?,
            "epsilon" => self.tabular.epsilon = parse(key, value)?,
            "exploration" => {
                self.tabular.exploration = match value {
                    "all" => Exploration::AllActions,
                    "others" => Exploration::OtherActions,
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "exploration must be all or others, got {value:?}"
                        )))
                    }
                }
            }
            "availability" | "budget" => match &mut self.advisor {
                AdvisorConfig::Teacher(t) if key == "availability" => t.availability = parse(key, value)?,
                AdvisorConfig::Teacher(t) => t.budget = parse_budget(value)?,
                AdvisorConfig::Shaper(s) if key == "availability" => s.availability = parse(key, value)?,
                AdvisorConfig::Shaper(s) => s.budget = parse_budget(value)?,
                other => return Err(no_field(key, other)),
            },
            "p_right" | "advice_mode" | "mass" => match &mut self.advisor {
                AdvisorConfig::Teacher(t) => match key {
                    "p_right" => t.p_right = parse(key, value)?,
                    "advice_mode" => {
                        t.mode = match value {
                            "deterministic" => AdviceMode::Deterministic,
                            "stochastic" => AdviceMode::Stochastic {
                                mass: AdviceMode::DEFAULT_STOCHASTIC_MASS,
                            },
                            _ => {
                                return Err(HarnessError::Config(format!(
                                    "advice_mode must be deterministic or stochastic, got {value:?}"
                                )))
                            }
                        }
                    }
                    _ => {
                        t.mode = AdviceMode::Stochastic {
                            mass: parse(key, value)?,
                        }
                    }
                },
                other => return Err(no_field(key, other)),
            },
            "punishment" | "correct_reward" => match &mut self.advisor {
                AdvisorConfig::Shaper(s) if key == "punishment" => s.punishment = parse(key, value)?,
                AdvisorConfig::Shaper(s) => s.correct_reward = parse(key, value)?,
                other => return Err(no_field(key, other)),
            },
            "forced_state" | "forced_action" => match &mut self.advisor {
                AdvisorConfig::Forced { state, .. } if key == "forced_state" => *state = parse(key, value)?,
                AdvisorConfig::Forced { action, .. } => *action = parse(key, value)?,
                other => return Err(no_field(key, other)),
            },
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                return Err(HarnessError::Config(format!(
                    "unknown key {key:?}, settable keys: {}",
                    SETTABLE_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key=value` string.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), HarnessError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.max_decisions == 0 {
            return Err(HarnessError::Config("max_decisions must be at least 1".into()));
        }
        match self.agent {
            AgentKind::Dpg => self.dpg.validate()?,
            _ => {
                crate::agents::QTable::new(1, 1, self.tabular)?;
            }
        }
        let five_rooms_only = |what: &str| {
            if self.env == EnvId::FiveRooms {
                Ok(())
            } else {
                Err(HarnessError::Config(format!(
                    "the {what} only works on five-rooms, not {}",
                    self.env
                )))
            }
        };
        match &self.advisor {
            AdvisorConfig::None => {}
            AdvisorConfig::Teacher(t) => {
                five_rooms_only("teacher")?;
                t.validate()?;
            }
            AdvisorConfig::Shaper(s) => {
                five_rooms_only("reward shaper")?;
                s.validate()?;
            }
            AdvisorConfig::Forced { state, action } => {
                let (states, actions) = super::run::env_dims(self.env);
                if *state >= states || *action >= actions {
                    return Err(HarnessError::Config(format!(
                        "forced advice ({state}, {action}) out of range for {}",
                        self.env
                    )));
                }
            }
            AdvisorConfig::Fixed(d) => {
                let (_, actions) = super::run::env_dims(self.env);
                if d.len() != actions {
                    return Err(HarnessError::Config(format!(
                        "fixed advice has {} entries, {} has {actions} actions",
                        d.len(),
                        self.env
                    )));
                }
            }
        }
        Ok(())
    }
}

fn no_field(key: &str, advisor: &AdvisorConfig) -> HarnessError {
    HarnessError::Config(format!("{key} does not apply to advisor {}", advisor.name()))
}

/// A named preset.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

/// Adam step size used for the Five Rooms presets.
pub const FIVE_ROOMS_LR: f64 = 0.005;
/// Per-decision discount of the Five Rooms learners. Learning curves still
/// report undiscounted returns.
pub const FIVE_ROOMS_GAMMA: f64 = 0.97;
/// Adam step size used for the two-state presets.
pub const TWO_STATE_LR: f64 = 0.01;
/// Advice-free episodes before forced advice starts in the tabular two-state presets.
pub const TWO_STATE_WARMUP: usize = 2500;

pub fn scenario_catalog() -> Vec<Scenario> {
    let five_rooms = |name: &str, agent: AgentKind, advisor: AdvisorConfig| ExperimentConfig {
        name: name.into(),
        env: EnvId::FiveRooms,
        agent,
        advisor,
        dpg: DpgConfig {
            adam: AdamConfig::with_lr(FIVE_ROOMS_LR),
            gamma: FIVE_ROOMS_GAMMA,
            ..DpgConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let teacher = |availability: f64, budget: Option<u64>| {
        AdvisorConfig::Teacher(TeacherConfig {
            availability,
            budget,
            ..TeacherConfig::default()
        })
    };
    let shaper = |availability: f64, budget: Option<u64>| {
        AdvisorConfig::Shaper(RewardShaperConfig {
            availability,
            budget,
            ..RewardShaperConfig::default()
        })
    };
    let forced = AdvisorConfig::Forced {
        state: TwoStateEnv::S2,
        action: TwoStateEnv::A2,
    };
    let two_state = |name: &str, agent: AgentKind, advice_from: usize, episodes: usize| ExperimentConfig {
        name: name.into(),
        env: EnvId::TwoState,
        agent,
        advisor: forced.clone(),
        advice_from,
        episodes,
        seeds: vec![0],
        dpg: DpgConfig {
            adam: AdamConfig::with_lr(TWO_STATE_LR),
            ..DpgConfig::default()
        },
        ..ExperimentConfig::default()
    };

    vec![
        Scenario {
            name: "pg-plain",
            description: "policy gradient on Five Rooms, no teacher",
            config: five_rooms("pg-plain", AgentKind::Dpg, AdvisorConfig::None),
        },
        Scenario {
            name: "dpg-advice",
            description: "DPG with a correct teacher present at 5% of decisions",
            config: five_rooms("dpg-advice", AgentKind::Dpg, teacher(0.05, None)),
        },
        Scenario {
            name: "pg-reward",
            description: "policy gradient with a reward-shaping teacher at 5% of decisions",
            config: five_rooms("pg-reward", AgentKind::Dpg, shaper(0.05, None)),
        },
        Scenario {
            name: "dpg-budget700",
            description: "DPG advised at every decision until 700 advices are spent",
            config: five_rooms("dpg-budget700", AgentKind::Dpg, teacher(1.0, Some(700))),
        },
        Scenario {
            name: "pg-reward-budget10000",
            description: "policy gradient judged at every decision until 10000 punishments are spent",
            config: five_rooms("pg-reward-budget10000", AgentKind::Dpg, shaper(1.0, Some(10_000))),
        },
        Scenario {
            name: "twostate-q-forced",
            description: "Q-Learning on the two-state MDP, wrong action a2 forced at s2 after a warmup",
            config: two_state("twostate-q-forced", AgentKind::QLearning, TWO_STATE_WARMUP, 10_000),
        },
        Scenario {
            name: "twostate-sarsa-forced",
            description: "SARSA on the two-state MDP, wrong action a2 forced at s2 after a warmup",
            config: two_state("twostate-sarsa-forced", AgentKind::Sarsa, TWO_STATE_WARMUP, 10_000),
        },
        Scenario {
            name: "twostate-pg-forced",
            description: "DPG on the two-state MDP with a2 forced at s2 from the start",
            config: two_state("twostate-pg-forced", AgentKind::Dpg, 0, 2000),
        },
        Scenario {
            name: "bandit-mixing",
            description: "epsilon-greedy Q-Learning on the one-state bandit under fixed advice (0.01, 0.99)",
            config: ExperimentConfig {
                name: "bandit-mixing".into(),
                env: EnvId::Bandit,
                agent: AgentKind::QLearning,
                advisor: AdvisorConfig::Fixed(Distribution::new(vec![0.01, 0.99]).expect("valid advice")),
                tabular: TabularConfig {
                    exploration: Exploration::OtherActions,
                    ..TabularConfig::default()
                },
                ..ExperimentConfig::default()
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_setups() {
        let c = ExperimentConfig::scenario("dpg-budget700").unwrap();
        match c.advisor {
            AdvisorConfig::Teacher(t) => {
                assert_eq!(t.availability, 1.0);
                assert_eq!(t.budget, Some(700));
            }
            other => panic!("{other:?}"),
        }
        let c = ExperimentConfig::scenario("pg-reward-budget10000").unwrap();
        assert_eq!(c.advisor.budget(), Some(10_000));
        for s in scenario_catalog() {
            s.config.validate().unwrap();
            assert_eq!(s.config.name, s.name);
        }
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let err = ExperimentConfig::scenario("nope").unwrap_err().to_string();
        assert!(err.contains("pg-plain") && err.contains("bandit-mixing"), "{err}");
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::scenario("dpg-advice").unwrap();
        c.set_pair("availability=0.2").unwrap();
        c.set_pair("seeds=3").unwrap();
        c.set_pair("lr=0.5").unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2]);
        assert_eq!(c.dpg.adam.lr, 0.5);
        assert!(matches!(c.advisor, AdvisorConfig::Teacher(ref t) if t.availability == 0.2));
        c.set_pair("seeds=4,9").unwrap();
        assert_eq!(c.seeds, vec![4, 9]);
        assert!(c.set_pair("punishment=1").is_err());
        assert!(c.set_pair("bogus=1").is_err());
        assert!(c.set_pair("novalue").is_err());
        c.set_pair("episodes=0").unwrap();
        assert!(c.validate().is_err());
    }
}
