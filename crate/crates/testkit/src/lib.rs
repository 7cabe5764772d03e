//! Test support: seeded random corpora and a brute-force metric evaluator.
//!
//! The evaluator reads the JSONL corpus format directly and shares no code
//! with the engine, so agreement between the two is meaningful.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const USER_INTENTS: &[&str] = &["Disclose", "Refine", "Inquire", "Accept", "Reject", "Other"];
const SYSTEM_INTENTS: &[&str] = &["Recommend", "Explain", "Request", "Respond", "Other"];
const TITLES: &[&str] = &["Heat", "Lion", "Arrival", "Superbad", "Zodiac"];
const SYSTEMS: &[&str] = &["alpha", "beta", "gamma"];
const WORDS: &[&str] = &[
    "movie", "great", "maybe", "the", "comedy", "thanks", "what", "about", "it",
];

fn random_act(rng: &mut ChaCha8Rng, intents: &[&str]) -> Value {
    let intent = *intents.choose(rng).expect("non-empty");
    let n_titles = if matches!(intent, "Recommend" | "Accept" | "Reject") {
        rng.random_range(0..=2)
    } else {
        0
    };
    let slots: Vec<Value> = TITLES
        .choose_multiple(rng, n_titles)
        .map(|t| json!({"slot": "TITLE", "value": t}))
        .collect();
    json!({"intent": intent, "slots": slots})
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=6);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random annotated corpus in JSONL form with up to `max_dialogues`
/// dialogues of up to `max_utterances` utterances each. At least one
/// utterance carries an act.
pub fn random_corpus_jsonl(seed: u64, max_dialogues: usize, max_utterances: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_dialogues = rng.random_range(1..=max_dialogues.max(1));
    let mut lines = vec![json!({"schema_version": "1.0"}).to_string()];
    let mut any_act = false;
    for d in 0..n_dialogues {
        let n_utterances = rng.random_range(1..=max_utterances.max(1));
        let mut utterances = Vec::new();
        for index in 0..n_utterances {
            let user = rng.random_bool(0.5);
            let intents = if user { USER_INTENTS } else { SYSTEM_INTENTS };
            let n_acts = rng.random_range(0..=2);
            let mut acts: Vec<Value> = (0..n_acts).map(|_| random_act(&mut rng, intents)).collect();
            if !any_act && d == n_dialogues - 1 && index == n_utterances - 1 && acts.is_empty() {
                acts.push(random_act(&mut rng, intents));
            }
            any_act |= !acts.is_empty();
            let items: Vec<&str> = if !user && rng.random_bool(0.3) {
                TITLES.choose_multiple(&mut rng, 2).copied().collect()
            } else {
                Vec::new()
            };
            utterances.push(json!({
                "index": index,
                "speaker": if user { "USER" } else { "SYSTEM" },
                "text": random_text(&mut rng),
                "acts": acts,
                "items": items,
            }));
        }
        let record = json!({
            "dialogue_id": format!("d{d:02}-{}", rng.random_range(0..1000)),
            "crs_id": SYSTEMS.choose(&mut rng).expect("non-empty"),
            "provenance": "human",
            "utterances": utterances,
        });
        lines.push(record.to_string());
    }
    lines.join("\n") + "\n"
}

/// Brute-force per-dialogue and per-system scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleScores {
    pub per_dialogue: BTreeMap<String, f64>,
    pub per_system: BTreeMap<String, f64>,
}

struct Turn {
    user: bool,
    intents: Vec<String>,
    titles_per_act: Vec<Vec<String>>,
}

fn turns(record: &Value) -> Vec<Turn> {
    record["utterances"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|u| {
            let acts = u["acts"].as_array().cloned().unwrap_or_default();
            Turn {
                user: u["speaker"] == "USER",
                intents: acts
                    .iter()
                    .map(|a| a["intent"].as_str().unwrap_or("").to_string())
                    .collect(),
                titles_per_act: acts
                    .iter()
                    .map(|a| {
                        a["slots"]
                            .as_array()
                            .into_iter()
                            .flatten()
                            .filter(|s| {
                                s["slot"]
                                    .as_str()
                                    .is_some_and(|n| n.eq_ignore_ascii_case("title"))
                            })
                            .filter_map(|s| s["value"].as_str().map(str::to_string))
                            .collect()
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Outcome list of recommendation rounds: `Some(true)` accepted,
/// `Some(false)` rejected, `None` unresolved.
pub fn oracle_rounds(record: &Value) -> Vec<Option<bool>> {
    let turns = turns(record);
    let mut outcomes = Vec::new();
    let mut from = 0;
    while let Some(open) = (from..turns.len())
        .find(|&i| !turns[i].user && turns[i].intents.iter().any(|x| x == "Recommend"))
    {
        let close = (open + 1..turns.len()).find(|&j| {
            turns[j].user
                && turns[j]
                    .intents
                    .iter()
                    .any(|x| x == "Accept" || x == "Reject")
        });
        match close {
            None => {
                outcomes.push(None);
                break;
            }
            Some(j) => {
                let first = turns[j]
                    .intents
                    .iter()
                    .find(|x| *x == "Accept" || *x == "Reject")
                    .expect("found above");
                outcomes.push(Some(first == "Accept"));
                from = j + 1;
            }
        }
    }
    outcomes
}

fn dialogue_success(record: &Value) -> f64 {
    let accepted = turns(record)
        .iter()
        .any(|t| t.user && t.intents.iter().any(|x| x == "Accept"));
    if accepted {
        1.0
    } else {
        0.0
    }
}

fn dialogue_srrr(record: &Value) -> f64 {
    let rounds = oracle_rounds(record);
    if rounds.is_empty() {
        return 0.0;
    }
    rounds.iter().filter(|r| **r == Some(true)).count() as f64 / rounds.len() as f64
}

/// Number of accepted items: distinct accepted titles plus untitled accepts.
pub fn oracle_accepted_items(record: &Value) -> usize {
    let mut titles = BTreeSet::new();
    let mut untitled = 0;
    for turn in turns(record).iter().filter(|t| t.user) {
        for (intent, act_titles) in turn.intents.iter().zip(&turn.titles_per_act) {
            if intent != "Accept" {
                continue;
            }
            if act_titles.is_empty() {
                untitled += 1;
            }
            titles.extend(act_titles.iter().cloned());
        }
    }
    titles.len() + untitled
}

fn dialogue_rdl(record: &Value) -> f64 {
    let length = record["utterances"].as_array().map_or(0, Vec::len);
    oracle_accepted_items(record) as f64 / length as f64
}

fn evaluate(jsonl: &str, per_dialogue: fn(&Value) -> f64) -> OracleScores {
    let mut records: Vec<Value> = jsonl
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .filter(|v: &Value| v.get("dialogue_id").is_some())
        .collect();
    records.sort_by(|a, b| a["dialogue_id"].as_str().cmp(&b["dialogue_id"].as_str()));

    let mut scores = OracleScores::default();
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for record in &records {
        let value = per_dialogue(record);
        let id = record["dialogue_id"]
            .as_str()
            .expect("string id")
            .to_string();
        scores.per_dialogue.insert(id, value);
        let entry = sums
            .entry(
                record["crs_id"]
                    .as_str()
                    .expect("string crs id")
                    .to_string(),
            )
            .or_default();
        entry.0 += value;
        entry.1 += 1;
    }
    scores.per_system = sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    scores
}

pub fn oracle_success_rate(jsonl: &str) -> OracleScores {
    evaluate(jsonl, dialogue_success)
}

pub fn oracle_srrr(jsonl: &str) -> OracleScores {
    evaluate(jsonl, dialogue_srrr)
}

pub fn oracle_rdl(jsonl: &str) -> OracleScores {
    evaluate(jsonl, dialogue_rdl)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(turns: &[(&str, &[&str])]) -> Value {
        let utterances: Vec<Value> = turns
            .iter()
            .enumerate()
            .map(|(i, (speaker, intents))| {
                json!({"index": i, "speaker": speaker, "text": "x",
                       "acts": intents.iter().map(|x| json!({"intent": x, "slots": []})).collect::<Vec<_>>()})
            })
            .collect();
        json!({"dialogue_id": "d", "crs_id": "c", "utterances": utterances})
    }

    #[test]
    fn hand_traced_two_rounds() {
        let r = record(&[
            ("SYSTEM", &["Recommend"]),
            ("USER", &["Inquire"]),
            ("SYSTEM", &["Respond"]),
            ("USER", &["Reject"]),
            ("SYSTEM", &["Recommend"]),
            ("USER", &["Accept"]),
        ]);
        assert_eq!(oracle_rounds(&r), vec![Some(false), Some(true)]);
        assert_eq!(dialogue_srrr(&r), 0.5);
        assert_eq!(dialogue_success(&r), 1.0);
        assert_eq!(dialogue_rdl(&r), 1.0 / 6.0);
    }

    #[test]
    fn generator_is_deterministic_and_bounded() {
        for seed in 0..20 {
            let a = random_corpus_jsonl(seed, 4, 8);
            assert_eq!(a, random_corpus_jsonl(seed, 4, 8));
            let dialogues = a.lines().count() - 1;
            assert!((1..=4).contains(&dialogues));
            assert!(a.contains("\"intent\""));
        }
    }
}
