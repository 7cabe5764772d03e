use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dialogue::{Corpus, Speaker};

use super::{Aggregation, MetricError, MetricReport};

/// Target items per recommendation turn, keyed by (dialogue id, utterance index).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    targets: HashMap<(String, usize), Vec<String>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct GroundTruthRecord {
    dialogue_id: String,
    index: usize,
    items: Vec<String>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dialogue_id: impl Into<String>, index: usize, items: Vec<String>) {
        self.targets.insert((dialogue_id.into(), index), items);
    }

    pub fn get(&self, dialogue_id: &str, index: usize) -> Option<&[String]> {
        self.targets
            .get(&(dialogue_id.to_string(), index))
            .map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Reads `{"dialogue_id", "index", "items"}` records, one per line.
    pub fn from_jsonl(text: &str) -> Result<Self, MetricError> {
        let mut gt = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: GroundTruthRecord = serde_json::from_str(line)
                .map_err(|e| MetricError::GroundTruth(format!("line {}: {e}", i + 1)))?;
            gt.insert(record.dialogue_id, record.index, record.items);
        }
        Ok(gt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecallVariant {
    /// Hits over target items, pooled across all recommendation turns.
    Standard,
    /// Hits over `n` times the number of recommendation turns, further scaled
    /// by one over the total number of turns.
    Eq2,
}

/// Pooled counts behind both recall variants for one system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallCounts {
    pub hits: usize,
    pub targets: usize,
    pub recommendation_turns: usize,
    pub total_turns: usize,
    pub skipped_turns: usize,
}

impl RecallCounts {
    pub fn standard(&self) -> Option<f64> {
        (self.targets > 0).then(|| self.hits as f64 / self.targets as f64)
    }

    /// Hits over `n` times the recommendation turns, before the 1/Σ|d| factor.
    pub fn eq2_inner(&self, n: usize) -> Option<f64> {
        let denominator = n * self.recommendation_turns;
        (denominator > 0).then(|| self.hits as f64 / denominator as f64)
    }

    pub fn eq2(&self, n: usize) -> Option<f64> {
        let inner = self.eq2_inner(n)?;
        (self.total_turns > 0).then(|| inner / self.total_turns as f64)
    }
}

/// Per-system pooled counts. A recommendation turn is a system utterance with
/// a non-empty item list; its list is cut to the first `n` items.
pub fn recall_counts(
    corpus: &Corpus,
    ground_truth: &GroundTruth,
    n: usize,
) -> Result<(BTreeMap<String, RecallCounts>, Vec<String>), MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidCutoff);
    }
    let mut counts: BTreeMap<String, RecallCounts> = BTreeMap::new();
    let mut warnings = Vec::new();
    for dialogue in &corpus.dialogues {
        let c = counts.entry(dialogue.crs_id.clone()).or_default();
        c.total_turns += dialogue.len();
        for utterance in &dialogue.utterances {
            if utterance.speaker != Speaker::System || utterance.items.is_empty() {
                continue;
            }
            let Some(targets) = ground_truth.get(&dialogue.dialogue_id, utterance.index) else {
                c.skipped_turns += 1;
                warnings.push(format!(
                    "no ground truth for recommendation turn {}#{}; turn skipped",
                    dialogue.dialogue_id, utterance.index
                ));
                continue;
            };
            let recommended: HashSet<&str> =
                utterance.items.iter().take(n).map(String::as_str).collect();
            let targets: HashSet<&str> = targets.iter().map(String::as_str).collect();
            c.hits += targets.intersection(&recommended).count();
            c.targets += targets.len();
            c.recommendation_turns += 1;
        }
    }
    Ok((counts, warnings))
}

/// Micro-averaged Recall@n in the requested variant.
pub fn recall_at_n(
    corpus: &Corpus,
    ground_truth: &GroundTruth,
    n: usize,
    variant: RecallVariant,
) -> Result<MetricReport, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let (counts, mut warnings) = recall_counts(corpus, ground_truth, n)?;
    let mut per_system = BTreeMap::new();
    for (system, c) in &counts {
        let value = match variant {
            RecallVariant::Standard => c.standard(),
            RecallVariant::Eq2 => c.eq2(n),
        };
        match value {
            Some(v) => {
                per_system.insert(system.clone(), v);
            }
            None => warnings.push(format!(
                "system `{system}` has no scorable recommendation turns"
            )),
        }
    }
    let metric = match variant {
        RecallVariant::Standard => format!("recall@{n}"),
        RecallVariant::Eq2 => format!("recall@{n}-eq2"),
    };
    Ok(MetricReport {
        metric,
        aggregation: Aggregation::Micro,
        per_system,
        per_dialogue: None,
        warnings,
    })
}
