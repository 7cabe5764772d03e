//! Utility-based evaluation for conversational recommender systems.
//!
//! The crate covers the full pipeline: a dialogue data model with JSONL
//! corpora, dialogue-act annotation, reward/cost utility metrics, user
//! simulators that drive live systems, connectors to LLMs and recommenders,
//! and rank-correlation analysis of metrics against user satisfaction.

pub mod analysis;
pub mod annotation;
pub mod connectors;
pub mod dialogue;
pub mod metrics;
pub mod simulation;

pub use dialogue::{
    parse_corpus, parse_corpus_str, serialize_corpus, Corpus, CorpusError, Dialogue, DialogueAct,
    IntentSchema, Satisfaction, Slot, Speaker, Utterance,
};
pub use metrics::{MetricError, MetricKind, MetricReport};
