//! Seeded batch experiments: configs, scenario presets, runs, CSV output.

mod config;
mod curve;
mod run;

pub use config::{
    scenario_catalog, AdvisorConfig, AgentKind, EnvId, ExperimentConfig, Scenario, FIVE_ROOMS_GAMMA, FIVE_ROOMS_LR,
    SETTABLE_KEYS, TWO_STATE_LR, TWO_STATE_WARMUP,
};
pub use curve::{fmt_g6, read_csv, summarize, write_csv, CurveRow, LearningCurve, SummaryRow, CSV_HEADER};
pub use run::{
    build_advisor, build_env, build_learner, run_experiment, run_seed, AnyLearner, DecisionOutcome, ExperimentResult,
    SeedResult, TrainingRun,
};

use thiserror::Error;

use crate::advice::AdviceError;
use crate::agents::AgentError;
use crate::mdp::MdpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Advice(#[from] AdviceError),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
