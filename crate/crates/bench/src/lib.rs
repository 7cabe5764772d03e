//! Inputs shared by the benchmarks.

use evalkit_core::analysis::Scores;
use evalkit_core::dialogue::{parse_corpus_str, IntentSchema};
use evalkit_core::Corpus;
use evalkit_testkit::random_corpus_jsonl;

/// Concatenates randomized corpora until at least `dialogues` are collected.
pub fn corpus(dialogues: usize) -> Corpus {
    let schema = IntentSchema::default();
    let mut out = Corpus::default();
    let mut seed = 0;
    while out.len() < dialogues {
        let part = parse_corpus_str(&random_corpus_jsonl(seed, 8, 24), &schema)
            .expect("generated corpus parses");
        for mut d in part.dialogues {
            d.dialogue_id = format!("{seed}-{}", d.dialogue_id);
            out.dialogues.push(d);
        }
        seed += 1;
    }
    out.dialogues.truncate(dialogues);
    out
}

/// Two score maps over `n` systems with a fixed, partly tied pattern.
pub fn score_pair(n: usize) -> (Scores, Scores) {
    let x = (0..n)
        .map(|i| (format!("s{i:05}"), ((i * 7919) % 997) as f64))
        .collect();
    let y = (0..n)
        .map(|i| (format!("s{i:05}"), ((i * 104_729) % 499) as f64 / 7.0))
        .collect();
    (x, y)
}
