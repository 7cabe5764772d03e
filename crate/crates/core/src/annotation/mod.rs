//! Dialogue-act annotation.
//!
//! Two annotators share one entry point: a deterministic cue-phrase annotator
//! that runs offline, and a few-shot annotator that asks an [`LlmGateway`].
//! Replies the LLM gets wrong twice become a single `Other` act carrying a
//! warning, so a corpus run never stops on a bad reply.

mod llm;
mod quality;
mod rules;

use serde::{Deserialize, Serialize};

use crate::connectors::{GatewayError, LlmGateway};
use crate::dialogue::{Corpus, DialogueAct, IntentSchema, Speaker, Utterance};

pub use llm::{parse_acts, PromptTemplate};
pub use quality::{evaluate_annotator, AnnotationQuality};
pub use rules::RuleTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotatorMode {
    Rule,
    Llm,
}

/// A labeled utterance shown to the LLM as an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub speaker: Speaker,
    pub text: String,
    pub acts: Vec<DialogueAct>,
}

#[derive(Debug, Clone)]
pub struct AnnotatorConfig {
    pub mode: AnnotatorMode,
    pub schema: IntentSchema,
    pub few_shot_examples: Vec<FewShotExample>,
    pub prompt_template: PromptTemplate,
    pub rules: RuleTable,
    /// Item titles the rule annotator looks for.
    pub titles: Vec<String>,
    /// Replace acts that are already present.
    pub overwrite: bool,
    /// Number of preceding utterances shown as context.
    pub context_window: usize,
}

impl AnnotatorConfig {
    pub fn rule(schema: IntentSchema) -> Self {
        Self {
            mode: AnnotatorMode::Rule,
            schema,
            few_shot_examples: Vec::new(),
            prompt_template: PromptTemplate::bundled_annotation(),
            rules: RuleTable::bundled(),
            titles: Vec::new(),
            overwrite: false,
            context_window: 4,
        }
    }

    pub fn llm(schema: IntentSchema, few_shot_examples: Vec<FewShotExample>) -> Self {
        Self {
            mode: AnnotatorMode::Llm,
            few_shot_examples,
            ..Self::rule(schema)
        }
    }

    pub fn with_titles(mut self, titles: Vec<String>) -> Self {
        self.titles = titles;
        self
    }

    pub fn prompt_template_id(&self) -> &str {
        &self.prompt_template.id
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        match self.mode {
            AnnotatorMode::Llm if self.few_shot_examples.is_empty() => {
                Err(AnnotationError::Config(
                    "LLM annotation needs at least one few-shot example".into(),
                ))
            }
            AnnotatorMode::Llm => {
                for ex in &self.few_shot_examples {
                    if let Some(act) = ex
                        .acts
                        .iter()
                        .find(|a| !self.schema.allows(ex.speaker, &a.intent))
                    {
                        return Err(AnnotationError::Config(format!(
                            "few-shot example uses intent `{}` outside the schema",
                            act.intent
                        )));
                    }
                }
                Ok(())
            }
            AnnotatorMode::Rule => self.rules.check_schema(&self.schema),
        }
    }
}

/// Bundled few-shot examples for LLM annotation.
pub fn bundled_examples() -> Vec<FewShotExample> {
    serde_json::from_str(include_str!("../../data/few_shot.json")).expect("bundled examples parse")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub acts: Vec<DialogueAct>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFailure {
    pub dialogue_id: String,
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error("gateway failure on utterance {index}: {source}")]
    Gateway {
        index: usize,
        #[source]
        source: GatewayError,
    },
    #[error("LLM annotation requested but no gateway is configured")]
    MissingGateway,
    #[error("annotator configuration: {0}")]
    Config(String),
    #[error("{} of {total} utterance(s) failed to annotate; first: {}", failures.len(), failures.first().map(|f| format!("{}#{}: {}", f.dialogue_id, f.index, f.message)).unwrap_or_default())]
    Aggregate {
        failures: Vec<AnnotationFailure>,
        total: usize,
    },
}

/// Annotates one utterance given the utterances before it.
pub fn annotate_utterance(
    utterance: &Utterance,
    context: &[Utterance],
    config: &AnnotatorConfig,
    gateway: Option<&dyn LlmGateway>,
) -> Result<Annotation, AnnotationError> {
    let window_start = context.len().saturating_sub(config.context_window);
    let context = &context[window_start..];
    match config.mode {
        AnnotatorMode::Rule => Ok(Annotation {
            acts: rules::annotate(
                utterance,
                context,
                &config.rules,
                &config.titles,
                &config.schema,
            ),
            warning: None,
        }),
        AnnotatorMode::Llm => {
            if utterance.text.trim().is_empty() {
                return Ok(Annotation {
                    acts: Vec::new(),
                    warning: None,
                });
            }
            let gateway = gateway.ok_or(AnnotationError::MissingGateway)?;
            llm::annotate_with_llm(
                utterance,
                context,
                &config.prompt_template,
                &config.few_shot_examples,
                &config.schema,
                gateway,
            )
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSummary {
    pub annotated: usize,
    pub kept: usize,
    pub warnings: Vec<String>,
}

/// Annotates every utterance of every dialogue. Utterances that already carry
/// acts are left alone unless `config.overwrite` is set. Text, items, order
/// and metadata are never touched.
pub fn annotate_corpus(
    corpus: &Corpus,
    config: &AnnotatorConfig,
    gateway: Option<&dyn LlmGateway>,
) -> Result<(Corpus, AnnotationSummary), AnnotationError> {
    config.validate()?;
    if config.mode == AnnotatorMode::Llm && gateway.is_none() {
        return Err(AnnotationError::MissingGateway);
    }
    let mut out = corpus.clone();
    let mut summary = AnnotationSummary::default();
    let mut failures = Vec::new();
    let mut total = 0;
    for dialogue in &mut out.dialogues {
        for i in 0..dialogue.utterances.len() {
            total += 1;
            let (before, rest) = dialogue.utterances.split_at_mut(i);
            let utterance = &mut rest[0];
            if !utterance.acts.is_empty() && !config.overwrite {
                summary.kept += 1;
                continue;
            }
            match annotate_utterance(utterance, before, config, gateway) {
                Ok(annotation) => {
                    utterance.acts = annotation.acts;
                    summary.annotated += 1;
                    if let Some(w) = annotation.warning {
                        summary
                            .warnings
                            .push(format!("{}: {w}", dialogue.dialogue_id));
                    }
                }
                Err(e) => failures.push(AnnotationFailure {
                    dialogue_id: dialogue.dialogue_id.clone(),
                    index: utterance.index,
                    message: e.to_string(),
                }),
            }
        }
    }
    if !failures.is_empty() {
        return Err(AnnotationError::Aggregate { failures, total });
    }
    Ok((out, summary))
}
