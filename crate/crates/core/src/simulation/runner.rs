use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::connectors::{CrsConnector, CrsError};
use crate::dialogue::{Corpus, Dialogue, Provenance, Speaker, TerminationReason, UserGoal};

use super::{sample_goal, Catalog, GoalConfig, SimulationError, SimulatorAction, UserSimulator};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLimits {
    /// Hard cap on utterances from both sides.
    pub max_utterances: usize,
    /// Consecutive CRS replies identical to the previous one before the
    /// conversation is cut with reason `loop-guard`.
    pub max_consecutive_nonprogress: usize,
    pub per_call_timeout: Duration,
    pub seed: u64,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_utterances: 20,
            max_consecutive_nonprogress: 3,
            per_call_timeout: Duration::from_secs(30),
            seed: 0,
        }
    }
}

impl RunLimits {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.max_utterances < 2 {
            return Err(SimulationError::Config(
                "max_utterances must be at least 2".into(),
            ));
        }
        if self.max_consecutive_nonprogress == 0 {
            return Err(SimulationError::Config(
                "max_consecutive_nonprogress must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Lets `simulator` talk to `crs` until one of them ends the conversation or
/// a limit is hit. The simulator speaks first.
///
/// A CRS timeout ends the dialogue early with reason `connector-timeout`;
/// other connector failures are errors.
pub fn run_conversation(
    simulator: &dyn UserSimulator,
    crs: &dyn CrsConnector,
    goal: &UserGoal,
    limits: &RunLimits,
    dialogue_id: &str,
) -> Result<Dialogue, SimulationError> {
    limits.validate()?;
    let mut session = simulator.start(goal, limits.seed)?;
    let mut dialogue = Dialogue::new(dialogue_id, crs.crs_id());
    dialogue.provenance = Provenance::Simulated;
    dialogue.goal = Some(goal.clone());
    dialogue.simulator_id = Some(simulator.simulator_id().to_string());

    let mut previous_reply: Option<(String, Vec<String>)> = None;
    let mut repeats = 0;
    let reason = loop {
        if dialogue.len() >= limits.max_utterances {
            break TerminationReason::MaxUtterances;
        }
        let turn = match session.next(&dialogue.utterances)? {
            SimulatorAction::Stop => break TerminationReason::SimulatorStop,
            SimulatorAction::Abort(why) => {
                dialogue
                    .extra
                    .insert("abort_reason".into(), Value::String(why));
                break TerminationReason::SimulatorAbort;
            }
            SimulatorAction::Say(turn) => turn,
        };
        dialogue.push(Speaker::User, turn.text.clone()).acts = turn.acts;
        if dialogue.len() >= limits.max_utterances {
            break TerminationReason::MaxUtterances;
        }

        let reply = match crs.send(dialogue_id, &turn.text, limits.per_call_timeout) {
            Ok(reply) => reply,
            Err(CrsError::Timeout) => break TerminationReason::ConnectorTimeout,
            Err(e) => return Err(e.into()),
        };
        dialogue.push(Speaker::System, reply.text.clone()).items = reply.items.clone();
        if reply.end {
            break TerminationReason::CrsEnded;
        }
        let current = (reply.text, reply.items);
        if previous_reply.as_ref() == Some(&current) {
            repeats += 1;
            if repeats >= limits.max_consecutive_nonprogress {
                break TerminationReason::LoopGuard;
            }
        } else {
            repeats = 0;
        }
        previous_reply = Some(current);
    };
    dialogue.termination_reason = Some(reason);
    let warnings = session.warnings();
    if !warnings.is_empty() {
        dialogue
            .extra
            .insert("simulator_warnings".into(), json!(warnings));
    }
    Ok(dialogue)
}

/// A run that produced no dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct GenerationPlan<'a> {
    pub n: usize,
    /// Run `i` uses seed `base_seed + i` for both its goal and its simulator.
    pub base_seed: u64,
    pub limits: RunLimits,
    pub catalog: &'a Catalog,
    pub goal_config: &'a GoalConfig,
    /// Number of sessions to run at once.
    pub jobs: usize,
}

fn run_one(
    simulator: &dyn UserSimulator,
    crs: &dyn CrsConnector,
    plan: &GenerationPlan<'_>,
    index: usize,
) -> Result<Dialogue, FailureRecord> {
    let seed = plan.base_seed.wrapping_add(index as u64);
    let fail = |e: SimulationError| FailureRecord {
        index,
        seed,
        reason: e.to_string(),
    };
    let goal = sample_goal(plan.catalog, plan.goal_config, seed).map_err(fail)?;
    let limits = RunLimits {
        seed,
        ..plan.limits.clone()
    };
    let id = format!("{}-{}-{index:04}", simulator.simulator_id(), crs.crs_id());
    run_conversation(simulator, crs, &goal, &limits, &id).map_err(fail)
}

/// Runs `plan.n` conversations with distinct seeds. Failed runs are listed
/// under `failures` in the corpus header; the batch fails only if every run
/// does. Output order follows the run index regardless of `jobs`.
pub fn generate_corpus(
    simulator: &dyn UserSimulator,
    crs: &dyn CrsConnector,
    plan: &GenerationPlan<'_>,
) -> Result<Corpus, SimulationError> {
    if plan.n == 0 {
        return Err(SimulationError::Config("n must be at least 1".into()));
    }
    plan.limits.validate()?;
    let results: Vec<Result<Dialogue, FailureRecord>> = if plan.jobs <= 1 {
        (0..plan.n)
            .map(|i| run_one(simulator, crs, plan, i))
            .collect()
    } else {
        let slots: Vec<Mutex<Option<Result<Dialogue, FailureRecord>>>> =
            (0..plan.n).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..plan.jobs.min(plan.n) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= plan.n {
                        break;
                    }
                    let result = run_one(simulator, crs, plan, i);
                    *slots[i].lock().expect("poisoned") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| {
                s.into_inner()
                    .expect("poisoned")
                    .expect("every index is run")
            })
            .collect()
    };

    let mut dialogues = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(d) => dialogues.push(d),
            Err(f) => {
                log::warn!("run {} (seed {}) failed: {}", f.index, f.seed, f.reason);
                failures.push(f);
            }
        }
    }
    if dialogues.is_empty() {
        return Err(SimulationError::AllRunsFailed(failures));
    }
    let mut corpus = Corpus::new(dialogues);
    corpus.header.insert(
        "generator".into(),
        json!({
            "simulator_id": simulator.simulator_id(),
            "crs_id": crs.crs_id(),
            "n": plan.n,
            "base_seed": plan.base_seed,
        }),
    );
    corpus.header.insert("failures".into(), json!(failures));
    Ok(corpus)
}
