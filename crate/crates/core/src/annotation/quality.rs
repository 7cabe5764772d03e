use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dialogue::{Corpus, Speaker, Utterance};

use super::AnnotationError;

/// Intent-level agreement between an annotator and gold labels. Slot values
/// are ignored. An intent with no predictions has no precision entry; an
/// intent with no gold occurrences has no recall entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationQuality {
    pub per_intent_precision: BTreeMap<String, f64>,
    pub per_intent_recall: BTreeMap<String, f64>,
    pub auc_user: Option<f64>,
    pub auc_system: Option<f64>,
}

fn intent_scores(u: &Utterance) -> HashMap<&str, f64> {
    let mut scores: HashMap<&str, f64> = HashMap::new();
    for act in &u.acts {
        let s = act.confidence.unwrap_or(1.0);
        let entry = scores.entry(act.intent.as_str()).or_insert(s);
        *entry = entry.max(s);
    }
    scores
}

/// Probability that a random positive outranks a random negative; ties count half.
fn roc_auc(samples: &[(f64, bool)]) -> Option<f64> {
    let positives: Vec<f64> = samples.iter().filter(|s| s.1).map(|s| s.0).collect();
    let negatives: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &positives {
        for n in &negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Some(wins / (positives.len() * negatives.len()) as f64)
}

/// Compares `predicted` with `gold`, aligned on dialogue id and utterance index.
pub fn evaluate_annotator(
    predicted: &Corpus,
    gold: &Corpus,
) -> Result<AnnotationQuality, AnnotationError> {
    let misaligned = |msg: String| AnnotationError::Config(format!("misaligned corpora: {msg}"));
    if predicted.len() != gold.len() {
        return Err(misaligned(format!(
            "{} predicted vs {} gold dialogues",
            predicted.len(),
            gold.len()
        )));
    }
    let gold_by_id: HashMap<&str, _> = gold
        .dialogues
        .iter()
        .map(|d| (d.dialogue_id.as_str(), d))
        .collect();

    let mut pairs: Vec<(&Utterance, &Utterance)> = Vec::new();
    for p in &predicted.dialogues {
        let g = gold_by_id
            .get(p.dialogue_id.as_str())
            .ok_or_else(|| misaligned(format!("dialogue `{}` missing from gold", p.dialogue_id)))?;
        if p.utterances.len() != g.utterances.len() {
            return Err(misaligned(format!(
                "dialogue `{}` differs in length",
                p.dialogue_id
            )));
        }
        for (pu, gu) in p.utterances.iter().zip(&g.utterances) {
            if pu.index != gu.index || pu.speaker != gu.speaker {
                return Err(misaligned(format!(
                    "dialogue `{}` utterance {} differs in index or speaker",
                    p.dialogue_id, pu.index
                )));
            }
            pairs.push((pu, gu));
        }
    }

    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut predicted_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut gold_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut role_intents: BTreeMap<Speaker, BTreeSet<&str>> = BTreeMap::new();
    for (pu, gu) in &pairs {
        let p: BTreeSet<&str> = pu.acts.iter().map(|a| a.intent.as_str()).collect();
        let g: BTreeSet<&str> = gu.acts.iter().map(|a| a.intent.as_str()).collect();
        for intent in &p {
            *predicted_count.entry(intent).or_default() += 1;
            if g.contains(intent) {
                *tp.entry(intent).or_default() += 1;
            }
        }
        for intent in &g {
            *gold_count.entry(intent).or_default() += 1;
        }
        role_intents
            .entry(pu.speaker)
            .or_default()
            .extend(p.union(&g));
    }

    let per_intent_precision = predicted_count
        .iter()
        .map(|(intent, n)| {
            (
                intent.to_string(),
                tp.get(intent).copied().unwrap_or(0) as f64 / *n as f64,
            )
        })
        .collect();
    let per_intent_recall = gold_count
        .iter()
        .map(|(intent, n)| {
            (
                intent.to_string(),
                tp.get(intent).copied().unwrap_or(0) as f64 / *n as f64,
            )
        })
        .collect();

    let auc_for = |speaker: Speaker| -> Option<f64> {
        let intents = role_intents.get(&speaker)?;
        let role_pairs: Vec<_> = pairs.iter().filter(|(p, _)| p.speaker == speaker).collect();
        let aucs: Vec<f64> = intents
            .iter()
            .filter_map(|intent| {
                let samples: Vec<(f64, bool)> = role_pairs
                    .iter()
                    .map(|(p, g)| {
                        let score = intent_scores(p).get(intent).copied().unwrap_or(0.0);
                        (score, g.has_intent(intent))
                    })
                    .collect();
                roc_auc(&samples)
            })
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    };

    Ok(AnnotationQuality {
        per_intent_precision,
        per_intent_recall,
        auc_user: auc_for(Speaker::User),
        auc_system: auc_for(Speaker::System),
    })
}
