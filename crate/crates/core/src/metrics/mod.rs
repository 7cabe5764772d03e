//! User-utility metrics for conversational recommenders.
//!
//! Every metric here is a reward/cost ratio in the sense of [`utility`]:
//!
//! | metric | reward per dialogue | cost per dialogue | averaging |
//! |--------|---------------------|-------------------|-----------|
//! | SR     | 1 if any user `Accept` | 1              | macro |
//! | SRRR   | accepted rounds     | number of rounds  | macro |
//! | RDL    | accepted items      | utterances        | macro |
//! | Recall@N | target hits       | target items (or N per rec. turn) | micro |
//!
//! Macro metrics average per-dialogue values within each system. The sum runs
//! over dialogues sorted by id, so system scores do not depend on corpus order.

mod recall;
mod rounds;
mod utility;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dialogue::{Corpus, Dialogue, Speaker, ACCEPT};

pub use recall::{recall_at_n, recall_counts, GroundTruth, RecallCounts, RecallVariant};
pub use rounds::{segment_rounds, RecommendationRound, RoundOutcome};
pub use utility::{utility, CostFactor, Factor, RewardFactor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("dialogue `{0}` has no dialogue-act annotations")]
    Unannotated(String),
    #[error("corpus has no dialogue-act annotations")]
    UnannotatedCorpus,
    #[error("corpus has no dialogues")]
    EmptyCorpus,
    #[error("dialogue `{0}` has no utterances")]
    EmptyDialogue(String),
    #[error("total cost is zero for dialogue `{0}`")]
    ZeroCost(String),
    #[error("Recall@N needs a positive cutoff")]
    InvalidCutoff,
    #[error("Recall@N requested without ground truth")]
    MissingGroundTruth,
    #[error("ground truth: {0}")]
    GroundTruth(String),
    #[error("{0}")]
    InvalidFactor(String),
    #[error("unknown metric `{0}`; valid metrics: sr, srrr, rdl, recall@N")]
    UnknownMetric(String),
    #[error("{} metric(s) failed: {}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Multiple(Vec<MetricError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Micro,
    Macro,
}

/// Scores for one metric, per system and optionally per dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub aggregation: Aggregation,
    pub per_system: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_dialogue: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    SuccessRate,
    Srrr,
    Rdl,
    RecallAt(usize),
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            MetricKind::SuccessRate => "sr".into(),
            MetricKind::Srrr => "srrr".into(),
            MetricKind::Rdl => "rdl".into(),
            MetricKind::RecallAt(n) => format!("recall@{n}"),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        match lowered.as_str() {
            "sr" | "success_rate" | "success-rate" => Ok(MetricKind::SuccessRate),
            "srrr" => Ok(MetricKind::Srrr),
            "rdl" => Ok(MetricKind::Rdl),
            other => other
                .strip_prefix("recall@")
                .and_then(|n| n.parse::<usize>().ok())
                .map(MetricKind::RecallAt)
                .ok_or_else(|| MetricError::UnknownMetric(s.to_string())),
        }
    }
}

fn user_accepts(dialogue: &Dialogue) -> impl Iterator<Item = &crate::dialogue::DialogueAct> {
    dialogue
        .utterances
        .iter()
        .filter(|u| u.speaker == Speaker::User)
        .flat_map(|u| u.acts.iter())
        .filter(|a| a.is(ACCEPT))
}

/// Whether the user accepted anything in the dialogue.
pub fn success(dialogue: &Dialogue) -> bool {
    user_accepts(dialogue).next().is_some()
}

/// |I_acc|: distinct titles on user `Accept` acts, plus one per `Accept`
/// without a title slot.
pub fn accepted_items(dialogue: &Dialogue) -> usize {
    let mut titles = BTreeSet::new();
    let mut untitled = 0;
    for act in user_accepts(dialogue) {
        let mut any = false;
        for title in act.item_values() {
            titles.insert(title);
            any = true;
        }
        if !any {
            untitled += 1;
        }
    }
    titles.len() + untitled
}

fn rounds_or_empty(dialogue: &Dialogue) -> Vec<RecommendationRound> {
    segment_rounds(dialogue).unwrap_or_default()
}

pub fn round_count(dialogue: &Dialogue) -> usize {
    rounds_or_empty(dialogue).len()
}

pub fn accepted_rounds(dialogue: &Dialogue) -> usize {
    rounds_or_empty(dialogue)
        .iter()
        .filter(|r| r.outcome == RoundOutcome::Accepted)
        .count()
}

/// Per-dialogue SRRR. Dialogues without rounds score 0.
pub fn srrr_of(dialogue: &Dialogue) -> f64 {
    let rounds = rounds_or_empty(dialogue);
    if rounds.is_empty() {
        return 0.0;
    }
    let accepted = rounds
        .iter()
        .filter(|r| r.outcome == RoundOutcome::Accepted)
        .count();
    accepted as f64 / rounds.len() as f64
}

/// Per-dialogue RDL.
pub fn rdl_of(dialogue: &Dialogue) -> Result<f64, MetricError> {
    if dialogue.is_empty() {
        return Err(MetricError::EmptyDialogue(dialogue.dialogue_id.clone()));
    }
    Ok(accepted_items(dialogue) as f64 / dialogue.len() as f64)
}

fn require_annotated(corpus: &Corpus) -> Result<(), MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if !corpus.dialogues.iter().any(Dialogue::is_annotated) {
        return Err(MetricError::UnannotatedCorpus);
    }
    Ok(())
}

/// Averages per-dialogue values within each system. Values are summed in
/// dialogue-id order.
fn macro_report<F>(
    corpus: &Corpus,
    metric: &str,
    per_dialogue_value: F,
) -> Result<MetricReport, MetricError>
where
    F: Fn(&Dialogue) -> Result<f64, MetricError>,
{
    let mut per_dialogue = BTreeMap::new();
    let mut per_system = BTreeMap::new();
    for (system, mut dialogues) in corpus.by_system() {
        dialogues.sort_by(|a, b| a.dialogue_id.cmp(&b.dialogue_id));
        let mut sum = 0.0;
        for d in &dialogues {
            let v = per_dialogue_value(d)?;
            per_dialogue.insert(d.dialogue_id.clone(), v);
            sum += v;
        }
        per_system.insert(system.to_string(), sum / dialogues.len() as f64);
    }
    Ok(MetricReport {
        metric: metric.to_string(),
        aggregation: Aggregation::Macro,
        per_system,
        per_dialogue: Some(per_dialogue),
        warnings: Vec::new(),
    })
}

pub fn success_rate(corpus: &Corpus) -> Result<MetricReport, MetricError> {
    require_annotated(corpus)?;
    macro_report(corpus, "sr", |d| Ok(if success(d) { 1.0 } else { 0.0 }))
}

pub fn srrr(corpus: &Corpus) -> Result<MetricReport, MetricError> {
    require_annotated(corpus)?;
    macro_report(corpus, "srrr", |d| Ok(srrr_of(d)))
}

pub fn rdl(corpus: &Corpus) -> Result<MetricReport, MetricError> {
    require_annotated(corpus)?;
    macro_report(corpus, "rdl", rdl_of)
}

/// Macro-averaged [`utility`] under arbitrary reward and cost factors.
pub fn utility_report(
    corpus: &Corpus,
    name: &str,
    rewards: &[RewardFactor],
    costs: &[CostFactor],
) -> Result<MetricReport, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    macro_report(corpus, name, |d| utility(d, rewards, costs))
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions<'a> {
    pub ground_truth: Option<&'a GroundTruth>,
}

/// Runs each requested metric. Recall@N yields two reports, the standard
/// micro recall and the `-eq2` variant. Failures are collected across metrics.
pub fn evaluate_system(
    corpus: &Corpus,
    metrics: &[MetricKind],
    options: &EvaluateOptions<'_>,
) -> Result<Vec<MetricReport>, MetricError> {
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for metric in metrics {
        let result = match metric {
            MetricKind::SuccessRate => success_rate(corpus).map(|r| vec![r]),
            MetricKind::Srrr => srrr(corpus).map(|r| vec![r]),
            MetricKind::Rdl => rdl(corpus).map(|r| vec![r]),
            MetricKind::RecallAt(n) => match options.ground_truth {
                None => Err(MetricError::MissingGroundTruth),
                Some(gt) => {
                    recall_at_n(corpus, gt, *n, RecallVariant::Standard).and_then(|standard| {
                        Ok(vec![
                            standard,
                            recall_at_n(corpus, gt, *n, RecallVariant::Eq2)?,
                        ])
                    })
                }
            },
        };
        match result {
            Ok(r) => reports.extend(r),
            Err(e) => errors.push(e),
        }
    }
    match errors.len() {
        0 => Ok(reports),
        1 => Err(errors.remove(0)),
        _ => Err(MetricError::Multiple(errors)),
    }
}
