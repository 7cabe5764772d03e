use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use serde_json::Value;

use super::{
    Corpus, Dialogue, DialogueError, IntentSchema, Metadata, Satisfaction, Speaker, SCHEMA_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: intent `{intent}` is not a {speaker} intent in the schema")]
    UnknownIntent {
        line: usize,
        intent: String,
        speaker: Speaker,
    },
    #[error("line {line}: duplicate dialogue_id `{id}`")]
    DuplicateDialogueId { line: usize, id: String },
    #[error("line {line}: invalid dialogue: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("no labeled dialogues for system `{0}`")]
    NoLabels(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    pub(super) fn from_dialogue(line: usize, err: DialogueError) -> Self {
        match err {
            DialogueError::UnknownIntent {
                intent, speaker, ..
            } => CorpusError::UnknownIntent {
                line,
                intent,
                speaker,
            },
            DialogueError::Invalid(reason) => CorpusError::Invalid { line, reason },
        }
    }

    /// 1-based line number of the offending record, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Malformed { line, .. }
            | CorpusError::UnknownIntent { line, .. }
            | CorpusError::DuplicateDialogueId { line, .. }
            | CorpusError::Invalid { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Parses a newline-delimited corpus and validates every record against `schema`.
pub fn parse_corpus(raw: impl Read, schema: &IntentSchema) -> Result<Corpus, CorpusError> {
    let reader = BufReader::new(raw);
    let mut corpus = Corpus::default();
    let mut ids = HashSet::new();
    let mut seen_record = false;

    for (i, line) in reader.split(b'\n').enumerate() {
        let line_no = i + 1;
        let bytes = line?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: format!("invalid UTF-8: {e}"),
        })?;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(text).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        let Value::Object(map) = value else {
            return Err(CorpusError::Malformed {
                line: line_no,
                reason: "record is not an object".into(),
            });
        };

        if map.contains_key("schema_version") && !map.contains_key("dialogue_id") {
            if seen_record {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    reason: "header record must come first".into(),
                });
            }
            let mut header: Metadata = map.into_iter().collect();
            corpus.schema_version = match header.remove("schema_version") {
                Some(Value::String(v)) => v,
                _ => {
                    return Err(CorpusError::Malformed {
                        line: line_no,
                        reason: "schema_version must be a string".into(),
                    })
                }
            };
            corpus.header = header;
            seen_record = true;
            continue;
        }
        seen_record = true;

        let dialogue: Dialogue =
            serde_json::from_value(Value::Object(map)).map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
        dialogue
            .validate(schema)
            .map_err(|e| CorpusError::from_dialogue(line_no, e))?;
        if !ids.insert(dialogue.dialogue_id.clone()) {
            return Err(CorpusError::DuplicateDialogueId {
                line: line_no,
                id: dialogue.dialogue_id,
            });
        }
        corpus.dialogues.push(dialogue);
    }
    Ok(corpus)
}

pub fn parse_corpus_str(raw: &str, schema: &IntentSchema) -> Result<Corpus, CorpusError> {
    parse_corpus(raw.as_bytes(), schema)
}

/// Writes the header record followed by one line per dialogue.
pub fn serialize_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut header = serde_json::Map::new();
    header.insert(
        "schema_version".into(),
        Value::String(if corpus.schema_version.is_empty() {
            SCHEMA_VERSION.to_string()
        } else {
            corpus.schema_version.clone()
        }),
    );
    for (k, v) in &corpus.header {
        header.insert(k.clone(), v.clone());
    }
    let mut out = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
    out.push(b'\n');
    for dialogue in &corpus.dialogues {
        serde_json::to_writer(&mut out, dialogue).expect("dialogue serializes");
        out.push(b'\n');
    }
    out
}

/// Fraction of a system's labeled dialogues marked satisfied. Unlabeled
/// dialogues are left out of the denominator.
pub fn satisfaction_score(corpus: &Corpus, crs_id: &str) -> Result<f64, CorpusError> {
    let (satisfied, labeled) = corpus
        .dialogues
        .iter()
        .filter(|d| d.crs_id == crs_id)
        .filter_map(|d| d.satisfaction)
        .fold((0usize, 0usize), |(s, n), label| {
            (s + usize::from(label == Satisfaction::Satisfied), n + 1)
        });
    if labeled == 0 {
        return Err(CorpusError::NoLabels(crs_id.to_string()));
    }
    Ok(satisfied as f64 / labeled as f64)
}
