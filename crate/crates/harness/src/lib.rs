//! Seeded competition scenarios for the epilog engine: scripted event logs,
//! referee questions with expected answers, and scoring with evidence checks.

pub mod config;
pub mod queries;
pub mod scenario;
pub mod score;
pub mod truth;

use epilog_core::space::MapError;
use thiserror::Error;

pub use config::{ScenarioConfig, TestName, DEFAULT_START_MS};
pub use queries::{default_session, generate_queries, Category, QueryItem};
pub use scenario::{generate_scenario, Person, Scenario, Thing};
pub use score::{evaluate_engine, run_and_score, Engine, Evaluation, QueryScore, Responder, ScoreReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("InsufficientScenario: {0}")]
    InsufficientScenario(String),
    #[error(transparent)]
    Map(#[from] MapError),
}
