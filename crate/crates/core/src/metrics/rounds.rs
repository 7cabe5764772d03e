use serde::{Deserialize, Serialize};

use crate::dialogue::{Dialogue, Speaker, ACCEPT, RECOMMEND, REJECT};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundOutcome {
    Accepted,
    Rejected,
    Unresolved,
}

/// Span from a system `Recommend` to the user's decision.
///
/// `end_index` is the index of the resolving user utterance, or the dialogue
/// length when the round is still open at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationRound {
    pub start_index: usize,
    pub end_index: usize,
    pub outcome: RoundOutcome,
    pub items: Vec<String>,
}

/// Splits an annotated dialogue into recommendation rounds.
///
/// A round opens at a system utterance with a `Recommend` act. Further
/// `Recommend`s before the user decides extend the open round. The first
/// later user utterance with `Accept` or `Reject` closes it; when an
/// utterance has both, the act listed first decides.
pub fn segment_rounds(dialogue: &Dialogue) -> Result<Vec<RecommendationRound>, MetricError> {
    if !dialogue.is_annotated() {
        return Err(MetricError::Unannotated(dialogue.dialogue_id.clone()));
    }
    let mut rounds = Vec::new();
    let mut open: Option<RecommendationRound> = None;

    for utterance in &dialogue.utterances {
        match utterance.speaker {
            Speaker::System => {
                let recommends: Vec<_> =
                    utterance.acts.iter().filter(|a| a.is(RECOMMEND)).collect();
                if recommends.is_empty() {
                    continue;
                }
                let round = open.get_or_insert_with(|| RecommendationRound {
                    start_index: utterance.index,
                    end_index: utterance.index,
                    outcome: RoundOutcome::Unresolved,
                    items: Vec::new(),
                });
                let mentioned = recommends
                    .iter()
                    .flat_map(|a| a.item_values())
                    .chain(utterance.items.iter().map(String::as_str));
                for item in mentioned {
                    if !round.items.iter().any(|i| i == item) {
                        round.items.push(item.to_string());
                    }
                }
            }
            Speaker::User => {
                let decision = utterance.acts.iter().find_map(|a| {
                    if a.is(ACCEPT) {
                        Some(RoundOutcome::Accepted)
                    } else if a.is(REJECT) {
                        Some(RoundOutcome::Rejected)
                    } else {
                        None
                    }
                });
                if let Some(outcome) = decision {
                    if let Some(mut round) = open.take() {
                        round.end_index = utterance.index;
                        round.outcome = outcome;
                        rounds.push(round);
                    }
                }
            }
        }
    }
    if let Some(mut round) = open {
        round.end_index = dialogue.len();
        rounds.push(round);
    }
    Ok(rounds)
}
