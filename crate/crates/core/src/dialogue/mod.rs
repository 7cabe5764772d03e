//! Dialogue transcripts, dialogue acts, user goals and corpora.
//!
//! A [`Corpus`] is stored as newline-delimited JSON: a leading header record
//! carrying `schema_version`, followed by one record per [`Dialogue`]. Keys the
//! model does not know about are kept in `extra` maps and written back out
//! unchanged.

mod corpus;
mod schema;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use corpus::{
    parse_corpus, parse_corpus_str, satisfaction_score, serialize_corpus, CorpusError,
};
pub use schema::{IntentSchema, SchemaError, ACCEPT, OTHER, RECOMMEND, REJECT};

/// Opaque key/value metadata preserved across parse and serialize.
pub type Metadata = BTreeMap<String, serde_json::Value>;

/// Slot name under which recommended or accepted item titles are carried.
pub const ITEM_SLOT: &str = "TITLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Speaker::User => "USER",
            Speaker::System => "SYSTEM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub slot: String,
    pub value: String,
}

impl Slot {
    pub fn new(slot: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            slot: slot.into(),
            value: value.into(),
        }
    }
}

/// An intent label plus its slot-value pairs, e.g. `Recommend(TITLE=Heat)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub intent: String,
    #[serde(default)]
    pub slots: Vec<Slot>,
    /// Annotator confidence in the intent, when the annotator provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(flatten)]
    pub extra: Metadata,
}

impl DialogueAct {
    pub fn new(intent: impl Into<String>) -> Self {
        Self {
            intent: intent.into(),
            slots: Vec::new(),
            confidence: None,
            extra: Metadata::new(),
        }
    }

    pub fn with_slot(mut self, slot: impl Into<String>, value: impl Into<String>) -> Self {
        self.slots.push(Slot::new(slot, value));
        self
    }

    pub fn is(&self, intent: &str) -> bool {
        self.intent == intent
    }

    /// Values of the item-title slots carried by this act.
    pub fn item_values(&self) -> impl Iterator<Item = &str> {
        self.slots
            .iter()
            .filter(|s| s.slot.eq_ignore_ascii_case(ITEM_SLOT))
            .map(|s| s.value.as_str())
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.intent)?;
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}='{}'", slot.slot, slot.value)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub acts: Vec<DialogueAct>,
    #[serde(default)]
    pub items: Vec<String>,
    #[serde(flatten)]
    pub extra: Metadata,
}

impl Utterance {
    pub fn new(index: usize, speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            index,
            speaker,
            text: text.into(),
            acts: Vec::new(),
            items: Vec::new(),
            extra: Metadata::new(),
        }
    }

    pub fn with_acts(mut self, acts: Vec<DialogueAct>) -> Self {
        self.acts = acts;
        self
    }

    pub fn with_items(mut self, items: Vec<String>) -> Self {
        self.items = items;
        self
    }

    pub fn has_intent(&self, intent: &str) -> bool {
        self.acts.iter().any(|a| a.is(intent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Satisfaction {
    Satisfied,
    Frustrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Human,
    Simulated,
}

/// Why a simulated conversation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    SimulatorStop,
    SimulatorAbort,
    CrsEnded,
    MaxUtterances,
    LoopGuard,
    ConnectorTimeout,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::SimulatorStop => "simulator-stop",
            TerminationReason::SimulatorAbort => "simulator-abort",
            TerminationReason::CrsEnded => "crs-ended",
            TerminationReason::MaxUtterances => "max-utterances",
            TerminationReason::LoopGuard => "loop-guard",
            TerminationReason::ConnectorTimeout => "connector-timeout",
        })
    }
}

/// Constraints on the wanted item plus attributes the user wants to learn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub constraints: Vec<Slot>,
    #[serde(default)]
    pub requests: Vec<String>,
}

impl UserGoal {
    pub fn validate(&self) -> Result<(), String> {
        if self.constraints.is_empty() {
            return Err("goal has no constraints".into());
        }
        let mut seen = HashSet::new();
        for c in &self.constraints {
            if c.slot.is_empty() {
                return Err("goal constraint with empty slot name".into());
            }
            if !seen.insert(c) {
                return Err(format!("duplicate goal constraint {}={}", c.slot, c.value));
            }
        }
        Ok(())
    }

    pub fn constraint(&self, slot: &str) -> Option<&str> {
        self.constraints
            .iter()
            .find(|c| c.slot == slot)
            .map(|c| c.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub crs_id: String,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<Satisfaction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<UserGoal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulator_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination_reason: Option<TerminationReason>,
    pub utterances: Vec<Utterance>,
    #[serde(flatten)]
    pub extra: Metadata,
}

/// A dialogue that violates the data model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DialogueError {
    #[error("intent `{intent}` is not a {speaker} intent in the schema (utterance {index})")]
    UnknownIntent {
        intent: String,
        speaker: Speaker,
        index: usize,
    },
    #[error("{0}")]
    Invalid(String),
}

impl Dialogue {
    pub fn new(dialogue_id: impl Into<String>, crs_id: impl Into<String>) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            crs_id: crs_id.into(),
            provenance: Provenance::Human,
            satisfaction: None,
            goal: None,
            simulator_id: None,
            termination_reason: None,
            utterances: Vec::new(),
            extra: Metadata::new(),
        }
    }

    /// Appends an utterance, assigning the next index.
    pub fn push(&mut self, speaker: Speaker, text: impl Into<String>) -> &mut Utterance {
        let index = self.utterances.len();
        self.utterances.push(Utterance::new(index, speaker, text));
        self.utterances.last_mut().expect("just pushed")
    }

    /// Number of utterances from both participants.
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn is_annotated(&self) -> bool {
        self.utterances.iter().any(|u| !u.acts.is_empty())
    }

    pub fn validate(&self, schema: &IntentSchema) -> Result<(), DialogueError> {
        let invalid = |msg: String| Err(DialogueError::Invalid(msg));
        if self.dialogue_id.is_empty() {
            return invalid("empty dialogue_id".into());
        }
        if self.crs_id.is_empty() {
            return invalid("empty crs_id".into());
        }
        if self.provenance == Provenance::Simulated {
            if self.simulator_id.as_deref().is_none_or(str::is_empty) {
                return invalid("simulated dialogue without simulator_id".into());
            }
            if self.goal.is_none() {
                return invalid("simulated dialogue without goal".into());
            }
        }
        if let Some(goal) = &self.goal {
            goal.validate().map_err(DialogueError::Invalid)?;
        }
        for (position, utterance) in self.utterances.iter().enumerate() {
            if utterance.index != position {
                return invalid(format!(
                    "utterance index {} at position {position}; indices must be consecutive from 0",
                    utterance.index
                ));
            }
            if utterance.items.iter().any(String::is_empty) {
                return invalid(format!("empty item identifier in utterance {position}"));
            }
            for act in &utterance.acts {
                if !schema.allows(utterance.speaker, &act.intent) {
                    return Err(DialogueError::UnknownIntent {
                        intent: act.intent.clone(),
                        speaker: utterance.speaker,
                        index: position,
                    });
                }
                let mut seen = HashSet::new();
                for slot in &act.slots {
                    if slot.slot.is_empty() {
                        return invalid(format!("empty slot name in utterance {position}"));
                    }
                    if !seen.insert(slot) {
                        return invalid(format!(
                            "duplicate slot {}={} in utterance {position}",
                            slot.slot, slot.value
                        ));
                    }
                }
                if let Some(c) = act.confidence {
                    if !(0.0..=1.0).contains(&c) {
                        return invalid(format!(
                            "confidence {c} outside [0,1] in utterance {position}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub schema_version: String,
    /// Additional header keys (seed, config hash, failure records, ...).
    pub header: Metadata,
    pub dialogues: Vec<Dialogue>,
}

impl Default for Corpus {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            header: Metadata::new(),
            dialogues,
        }
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    /// Dialogues grouped by system, in crs_id order.
    pub fn by_system(&self) -> BTreeMap<&str, Vec<&Dialogue>> {
        let mut groups: BTreeMap<&str, Vec<&Dialogue>> = BTreeMap::new();
        for d in &self.dialogues {
            groups.entry(d.crs_id.as_str()).or_default().push(d);
        }
        groups
    }

    pub fn counts_per_system(&self) -> BTreeMap<String, usize> {
        self.by_system()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.len()))
            .collect()
    }

    pub fn validate(&self, schema: &IntentSchema) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for (i, d) in self.dialogues.iter().enumerate() {
            let line = i + 2;
            d.validate(schema)
                .map_err(|e| CorpusError::from_dialogue(line, e))?;
            if !ids.insert(d.dialogue_id.as_str()) {
                return Err(CorpusError::DuplicateDialogueId {
                    line,
                    id: d.dialogue_id.clone(),
                });
            }
        }
        Ok(())
    }
}
