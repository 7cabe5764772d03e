use std::sync::Arc;

use crate::annotation::{annotate_utterance, AnnotatorConfig, PromptTemplate};
use crate::connectors::{ChatMessage, LlmGateway};
use crate::dialogue::{IntentSchema, Speaker, UserGoal, Utterance};

use super::{SimTurn, SimulationError, SimulatorAction, SimulatorSession, UserSimulator};

const DECISION_QUESTION: &str =
    "Should you continue the conversation? Reply with continue, stop or abort.";
const OPENING: &str = "Start the conversation.";
pub(crate) const GENERATION_FAILURE: &str = "generation-failure";

#[derive(Debug, Clone, PartialEq)]
pub struct LlmUsPrompts {
    pub decision: PromptTemplate,
    pub generation: PromptTemplate,
    /// Character budget for the rendered history in each prompt.
    pub history_budget: usize,
}

impl Default for LlmUsPrompts {
    fn default() -> Self {
        Self {
            decision: PromptTemplate::new(
                "llmus-decision-v1",
                include_str!("../../data/prompts/llmus_decision.txt"),
            ),
            generation: PromptTemplate::new(
                "llmus-generation-v1",
                include_str!("../../data/prompts/llmus_generation.txt"),
            ),
            history_budget: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmUsStep {
    Say(String),
    Stop,
    Abort(String),
}

pub fn render_goal(goal: &UserGoal) -> String {
    let constraints: Vec<String> = goal
        .constraints
        .iter()
        .map(|c| format!("{} = {}", c.slot, c.value))
        .collect();
    let mut text = format!("- You want a movie with: {}", constraints.join("; "));
    if !goal.requests.is_empty() {
        text.push_str(&format!(
            "\n- About the movie you pick, you want to know: {}",
            goal.requests.join(", ")
        ));
    }
    text
}

/// Renders `turns` one per line, dropping the oldest ones until the text fits
/// in `budget` characters. The newest turn is always kept. Dropped turns are
/// replaced by a marker line.
pub fn render_history(turns: &[Utterance], budget: usize) -> String {
    let lines: Vec<String> = turns
        .iter()
        .map(|u| {
            let who = match u.speaker {
                Speaker::User => "USER",
                Speaker::System => "SYSTEM",
            };
            format!("{who}: {}", u.text)
        })
        .collect();
    let mut kept = 0;
    let mut used = 0;
    for line in lines.iter().rev() {
        let cost = line.chars().count() + 1;
        if kept > 0 && used + cost > budget {
            break;
        }
        used += cost;
        kept += 1;
    }
    let omitted = lines.len() - kept;
    let mut out = Vec::with_capacity(kept + 1);
    if omitted > 0 {
        out.push(format!("[... {omitted} earlier turns omitted ...]"));
    }
    out.extend(lines[omitted..].iter().cloned());
    if out.is_empty() {
        "(no messages yet)".into()
    } else {
        out.join("\n")
    }
}

fn clean(reply: &str) -> String {
    let mut text = reply.trim();
    for prefix in ["USER:", "User:", "user:"] {
        if let Some(rest) = text.strip_prefix(prefix) {
            text = rest.trim_start();
        }
    }
    if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
        text = &text[1..text.len() - 1];
    }
    text.trim().to_string()
}

/// One LLM-driven step. Except on the opening turn, the gateway first decides
/// whether to continue; then it writes the next user message from the goal
/// and the history. The latest CRS message is sent as the final chat message.
pub fn llmus_next(
    goal: &UserGoal,
    history: &[Utterance],
    gateway: &dyn LlmGateway,
    prompts: &LlmUsPrompts,
) -> Result<LlmUsStep, SimulationError> {
    let goal_text = render_goal(goal);
    if !history.is_empty() {
        let prompt = prompts.decision.render(&[
            ("goal", &goal_text),
            ("history", &render_history(history, prompts.history_budget)),
        ]);
        let reply = gateway.complete(&[
            ChatMessage::system(prompt),
            ChatMessage::user(DECISION_QUESTION),
        ])?;
        let decision = reply
            .trim()
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_ascii_lowercase();
        if let Some(rest) = decision.strip_prefix("abort") {
            let reason = rest.trim_matches(|c: char| !c.is_alphanumeric()).trim();
            return Ok(LlmUsStep::Abort(if reason.is_empty() {
                "no-progress".into()
            } else {
                reason.to_string()
            }));
        }
        if decision.starts_with("stop") {
            return Ok(LlmUsStep::Stop);
        }
    }

    let (earlier, last) = match history.split_last() {
        Some((last, earlier)) if last.speaker == Speaker::System => (earlier, last.text.as_str()),
        _ => (history, OPENING),
    };
    let prompt = prompts.generation.render(&[
        ("goal", &goal_text),
        ("history", &render_history(earlier, prompts.history_budget)),
    ]);
    let messages = [ChatMessage::system(prompt), ChatMessage::user(last)];
    for _ in 0..2 {
        let text = clean(&gateway.complete(&messages)?);
        if !text.is_empty() {
            return Ok(LlmUsStep::Say(text));
        }
    }
    Ok(LlmUsStep::Abort(GENERATION_FAILURE.into()))
}

/// LLM-backed user simulator. Its own turns are annotated with `nlu`.
#[derive(Clone)]
pub struct LlmUserSimulator {
    id: String,
    gateway: Arc<dyn LlmGateway>,
    prompts: LlmUsPrompts,
    nlu: AnnotatorConfig,
}

impl LlmUserSimulator {
    pub fn new(gateway: Arc<dyn LlmGateway>) -> Self {
        Self {
            id: "llm-us".into(),
            gateway,
            prompts: LlmUsPrompts::default(),
            nlu: AnnotatorConfig::rule(IntentSchema::default()),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_prompts(mut self, prompts: LlmUsPrompts) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_nlu(mut self, nlu: AnnotatorConfig) -> Self {
        self.nlu = nlu;
        self
    }
}

impl UserSimulator for LlmUserSimulator {
    fn simulator_id(&self) -> &str {
        &self.id
    }

    fn start(
        &self,
        goal: &UserGoal,
        _seed: u64,
    ) -> Result<Box<dyn SimulatorSession + '_>, SimulationError> {
        goal.validate().map_err(SimulationError::Goal)?;
        Ok(Box::new(LlmUsSession {
            sim: self,
            goal: goal.clone(),
        }))
    }
}

struct LlmUsSession<'a> {
    sim: &'a LlmUserSimulator,
    goal: UserGoal,
}

impl SimulatorSession for LlmUsSession<'_> {
    fn next(&mut self, history: &[Utterance]) -> Result<SimulatorAction, SimulationError> {
        match llmus_next(
            &self.goal,
            history,
            self.sim.gateway.as_ref(),
            &self.sim.prompts,
        )? {
            LlmUsStep::Abort(reason) => Ok(SimulatorAction::Abort(reason)),
            LlmUsStep::Stop => Ok(SimulatorAction::Stop),
            LlmUsStep::Say(text) => {
                let utterance = Utterance::new(history.len(), Speaker::User, text.clone());
                let acts = annotate_utterance(
                    &utterance,
                    history,
                    &self.sim.nlu,
                    Some(self.sim.gateway.as_ref()),
                )
                .map_err(|e| SimulationError::Nlu(e.to_string()))?
                .acts;
                Ok(SimulatorAction::Say(SimTurn { text, acts }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectors::{Role, ScriptedGateway};
    use crate::dialogue::Slot;

    fn goal() -> UserGoal {
        UserGoal {
            constraints: vec![Slot::new("year", "2016")],
            requests: vec!["director".into()],
        }
    }

    fn history() -> Vec<Utterance> {
        vec![
            Utterance::new(0, Speaker::User, "I'm looking for a movie from 2016."),
            Utterance::new(1, Speaker::System, "You might like Lion."),
        ]
    }

    #[test]
    fn abort_decision() {
        let gw = ScriptedGateway::new(["abort"]);
        let step = llmus_next(&goal(), &history(), &gw, &LlmUsPrompts::default()).unwrap();
        assert_eq!(step, LlmUsStep::Abort("no-progress".into()));
        assert_eq!(gw.calls().len(), 1);
    }

    #[test]
    fn continue_then_generate() {
        let gw = ScriptedGateway::new(["continue", "Can you tell me the director?"]);
        let step = llmus_next(&goal(), &history(), &gw, &LlmUsPrompts::default()).unwrap();
        assert_eq!(step, LlmUsStep::Say("Can you tell me the director?".into()));
        let calls = gw.calls();
        assert_eq!(calls.len(), 2);
        assert!(calls[0][0].content.contains("year = 2016"));
        let last = calls[1].last().unwrap();
        assert_eq!(
            (last.role, last.content.as_str()),
            (Role::User, "You might like Lion.")
        );
    }

    #[test]
    fn opening_turn_skips_decision() {
        let gw = ScriptedGateway::new(["Hi, any good movies from 2016?"]);
        let step = llmus_next(&goal(), &[], &gw, &LlmUsPrompts::default()).unwrap();
        assert!(matches!(step, LlmUsStep::Say(_)));
        assert_eq!(gw.calls().len(), 1);
    }

    #[test]
    fn empty_generation_retried_once_then_aborts() {
        let gw = ScriptedGateway::new(["continue", "  ", "\"\""]);
        let step = llmus_next(&goal(), &history(), &gw, &LlmUsPrompts::default()).unwrap();
        assert_eq!(step, LlmUsStep::Abort(GENERATION_FAILURE.into()));
        let gw = ScriptedGateway::new(["continue", "", "User: ok then"]);
        let step = llmus_next(&goal(), &history(), &gw, &LlmUsPrompts::default()).unwrap();
        assert_eq!(step, LlmUsStep::Say("ok then".into()));
    }

    #[test]
    fn oversized_history_is_truncated_from_the_front() {
        let mut long = Vec::new();
        for i in 0..200 {
            let speaker = if i % 2 == 0 {
                Speaker::User
            } else {
                Speaker::System
            };
            long.push(Utterance::new(
                i,
                speaker,
                format!("turn {i} {}", "x".repeat(80)),
            ));
        }
        let prompts = LlmUsPrompts {
            history_budget: 1000,
            ..LlmUsPrompts::default()
        };
        let gw = ScriptedGateway::new(["continue", "Anything else?"]);
        let step = llmus_next(&goal(), &long, &gw, &prompts).unwrap();
        assert_eq!(step, LlmUsStep::Say("Anything else?".into()));
        let decision_prompt = &gw.calls()[0][0].content;
        assert!(decision_prompt.contains("earlier turns omitted"));
        assert!(decision_prompt.contains("turn 199 "));
        assert!(!decision_prompt.contains("turn 0 "));
    }

    #[test]
    fn render_history_keeps_newest_turn_even_over_budget() {
        let turns = vec![
            Utterance::new(0, Speaker::User, "a"),
            Utterance::new(1, Speaker::System, "b".repeat(50)),
        ];
        let text = render_history(&turns, 10);
        assert_eq!(
            text,
            format!(
                "[... 1 earlier turns omitted ...]\nSYSTEM: {}",
                "b".repeat(50)
            )
        );
        assert_eq!(
            render_history(&turns, 1000),
            format!("USER: a\nSYSTEM: {}", "b".repeat(50))
        );
    }

    #[test]
    fn session_annotates_own_turns() {
        let gw: Arc<dyn LlmGateway> = Arc::new(ScriptedGateway::new([
            "continue",
            "Sounds good, I'll watch it.",
        ]));
        let sim = LlmUserSimulator::new(gw);
        let mut session = sim.start(&goal(), 0).unwrap();
        match session.next(&history()).unwrap() {
            SimulatorAction::Say(turn) => assert!(turn.acts.iter().any(|a| a.intent == "Accept")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
