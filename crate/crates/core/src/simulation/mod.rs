//! Goal-driven user simulators and the conversation runner.
//!
//! Two simulators are provided. [`AbusSimulator`] keeps an agenda of user
//! acts built from its goal and picks the next act from a Markov
//! [`InteractionModel`]. [`LlmUserSimulator`] asks an LLM whether to go on
//! and, if so, what to say next. Both open the conversation.

mod abus;
mod catalog;
mod interaction;
mod llmus;
mod runner;

use serde::{Deserialize, Serialize};

use crate::connectors::{CrsError, GatewayError};
use crate::dialogue::{DialogueAct, UserGoal, Utterance};

pub use abus::{abus_next, render_user_act, AbusSimulator, AbusStep, SimulatorAgenda};
pub use catalog::{sample_goal, Catalog, CatalogItem, GoalConfig};
pub use interaction::{InteractionModel, ModelSource, BYE, START};
pub use llmus::{
    llmus_next, render_goal, render_history, LlmUsPrompts, LlmUsStep, LlmUserSimulator,
};
pub use runner::{generate_corpus, run_conversation, FailureRecord, GenerationPlan, RunLimits};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("goal sampling: {0}")]
    Goal(String),
    #[error("interaction model: {0}")]
    Model(String),
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("understanding the CRS reply failed: {0}")]
    Nlu(String),
    #[error(transparent)]
    Connector(#[from] CrsError),
    #[error("all {} runs failed; first failure: {}", .0.len(), .0.first().map(|f| f.reason.as_str()).unwrap_or("-"))]
    AllRunsFailed(Vec<FailureRecord>),
}

/// One user turn produced by a simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTurn {
    pub text: String,
    pub acts: Vec<DialogueAct>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulatorAction {
    Say(SimTurn),
    /// The goal is fulfilled or the simulator chose to say goodbye.
    Stop,
    /// The simulator gave up; the string says why.
    Abort(String),
}

/// A simulator configuration that can start independent sessions. Sessions
/// may run concurrently on different threads.
pub trait UserSimulator: Send + Sync {
    fn simulator_id(&self) -> &str;

    fn start(
        &self,
        goal: &UserGoal,
        seed: u64,
    ) -> Result<Box<dyn SimulatorSession + '_>, SimulationError>;
}

/// State of one simulated user within one conversation.
pub trait SimulatorSession {
    /// Produces the next user turn given everything said so far.
    fn next(&mut self, history: &[Utterance]) -> Result<SimulatorAction, SimulationError>;

    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}
