use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{annotate_utterance, AnnotatorConfig};
use crate::connectors::{ChatMessage, LlmGateway};
use crate::dialogue::{
    DialogueAct, IntentSchema, Slot, UserGoal, Utterance, ACCEPT, ITEM_SLOT, OTHER, RECOMMEND,
    REJECT,
};

use super::{
    Catalog, InteractionModel, SimTurn, SimulationError, SimulatorAction, SimulatorSession,
    UserSimulator, BYE,
};

const DISCLOSE: &str = "Disclose";
const INQUIRE: &str = "Inquire";
const REFINE: &str = "Refine";
const REQUEST: &str = "Request";
const RESPOND: &str = "Respond";
const EXPLAIN: &str = "Explain";

/// Pending user acts (top of stack last) plus progress towards the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorAgenda {
    pub stack: Vec<DialogueAct>,
    pub goal: UserGoal,
    pub fulfilled_constraints: BTreeSet<Slot>,
    pub fulfilled_requests: BTreeSet<String>,
    /// Titles the user accepted, in order.
    pub accepted: Vec<String>,
    /// Request attribute the user is waiting to hear about.
    pub pending_inquiry: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SimulatorAgenda {
    /// The initial agenda discloses every constraint, first constraint on top.
    pub fn new(goal: UserGoal) -> Self {
        let stack = goal
            .constraints
            .iter()
            .rev()
            .map(|c| DialogueAct::new(DISCLOSE).with_slot(c.slot.clone(), c.value.clone()))
            .collect();
        Self {
            stack,
            goal,
            fulfilled_constraints: BTreeSet::new(),
            fulfilled_requests: BTreeSet::new(),
            accepted: Vec::new(),
            pending_inquiry: None,
            warnings: Vec::new(),
        }
    }

    /// All constraints disclosed, all requests answered and something accepted.
    pub fn is_fulfilled(&self) -> bool {
        self.goal
            .constraints
            .iter()
            .all(|c| self.fulfilled_constraints.contains(c))
            && self
                .goal
                .requests
                .iter()
                .all(|r| self.fulfilled_requests.contains(r))
            && !self.accepted.is_empty()
    }

    /// Puts `act` on top, removing an identical pending act.
    pub fn push(&mut self, act: DialogueAct) {
        self.stack.retain(|a| a != &act);
        self.stack.push(act);
    }

    fn pop_intent(&mut self, intent: &str) -> Option<DialogueAct> {
        let pos = self.stack.iter().rposition(|a| a.is(intent))?;
        Some(self.stack.remove(pos))
    }

    fn has_intent(&self, intent: &str) -> bool {
        self.stack.iter().any(|a| a.is(intent))
    }

    fn interpret(&mut self, incoming: &Utterance, catalog: &Catalog) {
        let mut recommended = false;
        for act in &incoming.acts {
            match act.intent.as_str() {
                REQUEST => self.on_request(act),
                RECOMMEND if !recommended => {
                    let title = act
                        .item_values()
                        .next()
                        .map(str::to_string)
                        .or_else(|| incoming.items.first().cloned());
                    if let Some(title) = title {
                        self.on_recommend(&title, catalog);
                        recommended = true;
                    }
                }
                RESPOND | EXPLAIN => {
                    if let Some(request) = self.pending_inquiry.take() {
                        self.fulfilled_requests.insert(request);
                    }
                }
                _ => {}
            }
        }
    }

    fn on_request(&mut self, act: &DialogueAct) {
        let wanted = match act.slots.first() {
            Some(s) => self
                .goal
                .constraints
                .iter()
                .find(|c| c.slot.eq_ignore_ascii_case(&s.slot)),
            None => self
                .goal
                .constraints
                .iter()
                .find(|c| !self.fulfilled_constraints.contains(*c)),
        };
        if let Some(c) = wanted.cloned() {
            self.push(DialogueAct::new(DISCLOSE).with_slot(c.slot, c.value));
        }
    }

    fn on_recommend(&mut self, title: &str, catalog: &Catalog) {
        self.stack.retain(|a| !a.is(ACCEPT) && !a.is(REJECT));
        let suitable = catalog
            .find(title)
            .is_some_and(|item| item.satisfies(&self.goal));
        if suitable {
            let unanswered: Vec<String> = self
                .goal
                .requests
                .iter()
                .filter(|r| !self.fulfilled_requests.contains(*r))
                .cloned()
                .collect();
            for request in unanswered.into_iter().rev() {
                self.push(DialogueAct::new(INQUIRE).with_slot(request, title));
            }
            self.push(DialogueAct::new(ACCEPT).with_slot(ITEM_SLOT, title));
        } else {
            self.push(DialogueAct::new(REJECT).with_slot(ITEM_SLOT, title));
        }
    }

    fn record(&mut self, act: &DialogueAct) {
        match act.intent.as_str() {
            DISCLOSE => {
                for slot in &act.slots {
                    if self.goal.constraints.contains(slot) {
                        self.fulfilled_constraints.insert(slot.clone());
                    }
                }
            }
            ACCEPT => self
                .accepted
                .push(act.item_values().next().unwrap_or_default().to_string()),
            INQUIRE => self.pending_inquiry = act.slots.first().map(|s| s.slot.clone()),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbusStep {
    Act(DialogueAct),
    Stop,
}

/// One agenda-based step: interpret the annotated system utterance, stop if
/// the goal is fulfilled, otherwise sample the next user intent from the
/// interaction-model row of the system's first intent.
///
/// Sampling is restricted to intents pending on the agenda (plus `Bye`) and
/// the topmost matching act is popped. When none of those has mass, the full
/// row is sampled and a bare act is emitted. A missing row falls back to the
/// opening distribution and records a warning.
pub fn abus_next<R: Rng>(
    agenda: &mut SimulatorAgenda,
    model: &InteractionModel,
    incoming: Option<&Utterance>,
    catalog: &Catalog,
    rng: &mut R,
) -> AbusStep {
    if let Some(incoming) = incoming {
        agenda.interpret(incoming, catalog);
    }
    if agenda.is_fulfilled() {
        return AbusStep::Stop;
    }
    let row = match incoming {
        None => &model.initial[..],
        Some(u) => {
            let intent = u.acts.first().map(|a| a.intent.as_str()).unwrap_or(OTHER);
            match model.row(intent) {
                Some(row) => row,
                None => {
                    agenda.warnings.push(format!(
                        "no transition row for `{intent}`; used the opening distribution"
                    ));
                    &model.initial[..]
                }
            }
        }
    };
    let pending = |intent: &str| intent == BYE || agenda.has_intent(intent);
    let act = match model.sample(row, pending, rng) {
        Some(BYE) => return AbusStep::Stop,
        Some(intent) => {
            let intent = intent.to_string();
            agenda
                .pop_intent(&intent)
                .expect("sampled intent is on the agenda")
        }
        None => match model.sample(row, |_| true, rng) {
            Some(BYE) | None => return AbusStep::Stop,
            Some(intent) => DialogueAct::new(intent),
        },
    };
    agenda.record(&act);
    AbusStep::Act(act)
}

/// Template text for a user act.
pub fn render_user_act(act: &DialogueAct) -> String {
    let title = act.item_values().next();
    let slot = act.slots.first();
    match (act.intent.as_str(), title, slot) {
        (DISCLOSE, _, Some(s)) => format!("I'm looking for a movie with {} {}.", s.slot, s.value),
        (DISCLOSE, _, None) => "I'm looking for a movie.".into(),
        (REFINE, _, Some(s)) => format!("Something with {} {} instead?", s.slot, s.value),
        (REFINE, _, None) => "Something more recent instead?".into(),
        (INQUIRE, _, Some(s)) => format!("Can you tell me the {} of {}?", s.slot, s.value),
        (INQUIRE, _, None) => "Can you tell me more about it?".into(),
        (ACCEPT, Some(t), _) => format!("Sounds good, I'll watch {t}."),
        (ACCEPT, None, _) => "Sounds good, I'll watch that.".into(),
        (REJECT, Some(t), _) => format!("No thanks, I'm not interested in {t}."),
        (REJECT, None, _) => "No thanks, something else please.".into(),
        _ => "Hi!".into(),
    }
}

/// Agenda-based user simulator.
#[derive(Clone)]
pub struct AbusSimulator {
    id: String,
    model: InteractionModel,
    catalog: Catalog,
    nlu: AnnotatorConfig,
    nlu_gateway: Option<Arc<dyn LlmGateway>>,
    nlg_gateway: Option<Arc<dyn LlmGateway>>,
}

const NLG_INSTRUCTION: &str = "You are a user talking to a movie recommender system. \
Rewrite the dialogue act you are given as one short, natural user message. Reply with the message only.";

impl AbusSimulator {
    /// Offline simulator: rule-based understanding and template generation.
    pub fn new(model: InteractionModel, catalog: Catalog) -> Self {
        let nlu = AnnotatorConfig::rule(IntentSchema::default()).with_titles(catalog.titles());
        Self {
            id: "abus".into(),
            model,
            catalog,
            nlu,
            nlu_gateway: None,
            nlg_gateway: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Understands CRS replies with `config`, which may be an LLM annotator.
    pub fn with_nlu(
        mut self,
        config: AnnotatorConfig,
        gateway: Option<Arc<dyn LlmGateway>>,
    ) -> Self {
        self.nlu = config;
        self.nlu_gateway = gateway;
        self
    }

    /// Phrases user acts with an LLM instead of templates.
    pub fn with_nlg(mut self, gateway: Arc<dyn LlmGateway>) -> Self {
        self.nlg_gateway = Some(gateway);
        self
    }

    pub fn model(&self) -> &InteractionModel {
        &self.model
    }

    fn phrase(&self, act: &DialogueAct) -> Result<String, SimulationError> {
        if let Some(gateway) = &self.nlg_gateway {
            let reply = gateway.complete(&[
                ChatMessage::system(NLG_INSTRUCTION),
                ChatMessage::user(act.to_string()),
            ])?;
            let reply = reply.trim();
            if !reply.is_empty() {
                return Ok(reply.to_string());
            }
        }
        Ok(render_user_act(act))
    }
}

impl UserSimulator for AbusSimulator {
    fn simulator_id(&self) -> &str {
        &self.id
    }

    fn start(
        &self,
        goal: &UserGoal,
        seed: u64,
    ) -> Result<Box<dyn SimulatorSession + '_>, SimulationError> {
        goal.validate().map_err(SimulationError::Goal)?;
        Ok(Box::new(AbusSession {
            sim: self,
            agenda: SimulatorAgenda::new(goal.clone()),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }))
    }
}

struct AbusSession<'a> {
    sim: &'a AbusSimulator,
    agenda: SimulatorAgenda,
    rng: ChaCha8Rng,
}

impl SimulatorSession for AbusSession<'_> {
    fn next(&mut self, history: &[Utterance]) -> Result<SimulatorAction, SimulationError> {
        let incoming = match history.split_last() {
            Some((last, earlier)) if last.speaker == crate::dialogue::Speaker::System => {
                let mut last = last.clone();
                if last.acts.is_empty() {
                    let annotation = annotate_utterance(
                        &last,
                        earlier,
                        &self.sim.nlu,
                        self.sim
                            .nlu_gateway
                            .as_deref()
                            .map(|g| g as &dyn LlmGateway),
                    )
                    .map_err(|e| SimulationError::Nlu(e.to_string()))?;
                    last.acts = annotation.acts;
                }
                Some(last)
            }
            _ => None,
        };
        match abus_next(
            &mut self.agenda,
            &self.sim.model,
            incoming.as_ref(),
            &self.sim.catalog,
            &mut self.rng,
        ) {
            AbusStep::Stop => Ok(SimulatorAction::Stop),
            AbusStep::Act(act) => Ok(SimulatorAction::Say(SimTurn {
                text: self.sim.phrase(&act)?,
                acts: vec![act],
            })),
        }
    }

    fn warnings(&self) -> Vec<String> {
        self.agenda.warnings.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::Speaker;

    fn catalog() -> Catalog {
        Catalog::from_json(
            r#"[{"title": "Superbad", "genre": "comedy", "year": 2007},
                {"title": "Heat", "genre": "crime", "year": 1995}]"#,
        )
        .unwrap()
    }

    /// Two system rows: a Recommend is always answered by whatever decision
    /// is pending, a Request always by a disclosure.
    fn two_row_model() -> InteractionModel {
        InteractionModel::from_tsv(
            "system\tDisclose\tAccept\tReject\tInquire\tBye\n\
             <start>\t1\t0\t0\t0\t0\n\
             Recommend\t0\t0.5\t0.5\t0\t0\n\
             Request\t1\t0\t0\t0\t0\n",
        )
        .unwrap()
    }

    fn goal() -> UserGoal {
        UserGoal {
            constraints: vec![Slot::new("genre", "comedy"), Slot::new("year", "2007")],
            requests: vec!["director".into()],
        }
    }

    fn system(acts: Vec<DialogueAct>) -> Utterance {
        Utterance::new(1, Speaker::System, "...").with_acts(acts)
    }

    #[test]
    fn opening_discloses_first_constraint() {
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let step = abus_next(&mut agenda, &two_row_model(), None, &catalog(), &mut rng);
        assert_eq!(
            step,
            AbusStep::Act(DialogueAct::new(DISCLOSE).with_slot("genre", "comedy"))
        );
        assert!(agenda
            .fulfilled_constraints
            .contains(&Slot::new("genre", "comedy")));
    }

    #[test]
    fn matching_recommendation_is_accepted() {
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![
            DialogueAct::new(RECOMMEND).with_slot(ITEM_SLOT, "Superbad")
        ]);
        let step = abus_next(
            &mut agenda,
            &two_row_model(),
            Some(&incoming),
            &catalog(),
            &mut rng,
        );
        assert_eq!(
            step,
            AbusStep::Act(DialogueAct::new(ACCEPT).with_slot(ITEM_SLOT, "Superbad"))
        );
        assert_eq!(agenda.accepted, vec!["Superbad"]);
        // The follow-up question about the accepted movie stays pending.
        assert!(agenda
            .stack
            .contains(&DialogueAct::new(INQUIRE).with_slot("director", "Superbad")));
    }

    #[test]
    fn unsuitable_recommendation_is_rejected() {
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![
            DialogueAct::new(RECOMMEND).with_slot(ITEM_SLOT, "Heat")
        ]);
        let step = abus_next(
            &mut agenda,
            &two_row_model(),
            Some(&incoming),
            &catalog(),
            &mut rng,
        );
        assert_eq!(
            step,
            AbusStep::Act(DialogueAct::new(REJECT).with_slot(ITEM_SLOT, "Heat"))
        );
        assert!(agenda.accepted.is_empty());
    }

    #[test]
    fn request_for_constrained_slot_is_answered_from_goal() {
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![DialogueAct::new(REQUEST).with_slot("year", "")]);
        let step = abus_next(
            &mut agenda,
            &two_row_model(),
            Some(&incoming),
            &catalog(),
            &mut rng,
        );
        assert_eq!(
            step,
            AbusStep::Act(DialogueAct::new(DISCLOSE).with_slot("year", "2007"))
        );
    }

    #[test]
    fn fulfilled_goal_stops() {
        let mut agenda = SimulatorAgenda::new(goal());
        agenda.fulfilled_constraints.extend(goal().constraints);
        agenda.fulfilled_requests.insert("director".into());
        agenda.accepted.push("Superbad".into());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![DialogueAct::new(RESPOND)]);
        assert_eq!(
            abus_next(
                &mut agenda,
                &two_row_model(),
                Some(&incoming),
                &catalog(),
                &mut rng
            ),
            AbusStep::Stop
        );
    }

    #[test]
    fn answer_to_inquiry_completes_goal() {
        let mut agenda = SimulatorAgenda::new(goal());
        agenda.fulfilled_constraints.extend(goal().constraints);
        agenda.accepted.push("Superbad".into());
        agenda.pending_inquiry = Some("director".into());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![DialogueAct::new(EXPLAIN)]);
        assert_eq!(
            abus_next(
                &mut agenda,
                &two_row_model(),
                Some(&incoming),
                &catalog(),
                &mut rng
            ),
            AbusStep::Stop
        );
    }

    #[test]
    fn missing_row_falls_back_with_warning() {
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let incoming = system(vec![DialogueAct::new("Respond")]);
        let step = abus_next(
            &mut agenda,
            &two_row_model(),
            Some(&incoming),
            &catalog(),
            &mut rng,
        );
        assert!(matches!(step, AbusStep::Act(ref a) if a.is(DISCLOSE)));
        assert_eq!(agenda.warnings.len(), 1);
    }

    #[test]
    fn sampled_bye_stops() {
        let model = InteractionModel::from_tsv("system\tDisclose\tBye\n<start>\t0\t1\n").unwrap();
        let mut agenda = SimulatorAgenda::new(goal());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            abus_next(&mut agenda, &model, None, &catalog(), &mut rng),
            AbusStep::Stop
        );
    }

    #[test]
    fn templates_reannotate_to_same_intent() {
        let config =
            AnnotatorConfig::rule(IntentSchema::default()).with_titles(vec!["Superbad".into()]);
        let acts = [
            DialogueAct::new(DISCLOSE).with_slot("genre", "comedy"),
            DialogueAct::new(ACCEPT).with_slot(ITEM_SLOT, "Superbad"),
            DialogueAct::new(REJECT).with_slot(ITEM_SLOT, "Superbad"),
            DialogueAct::new(INQUIRE).with_slot("director", "Superbad"),
            DialogueAct::new(REFINE),
        ];
        for act in acts {
            let u = Utterance::new(0, Speaker::User, render_user_act(&act));
            let found = annotate_utterance(&u, &[], &config, None).unwrap().acts;
            assert!(
                found.iter().any(|a| a.intent == act.intent),
                "{} -> {found:?}",
                u.text
            );
        }
    }
}
