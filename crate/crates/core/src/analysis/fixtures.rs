use std::collections::BTreeMap;

use super::Scores;

/// System id used for aggregate rows such as published averages.
pub const AGGREGATE: &str = "*";

const BUNDLED: &str = include_str!("../../data/published_scores.tsv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("score table line {line}: {reason}")]
pub struct FixtureError {
    pub line: usize,
    pub reason: String,
}

/// Published per-system scores keyed by (source, metric). Sources are
/// `human` for real-user conversations and the simulator name otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PublishedScores {
    table: BTreeMap<(String, String), Scores>,
}

impl PublishedScores {
    /// Scores shipped with the crate: dialogue counts, satisfaction, Recall@1,
    /// SR, SRRR and RDL for real users, and RDL for both simulators.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled score table is well formed")
    }

    /// Reads `source<TAB>metric<TAB>system<TAB>value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut table: BTreeMap<(String, String), Scores> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |reason: String| FixtureError {
                line: i + 1,
                reason,
            };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [source, metric, system, value] = fields[..] else {
                return Err(err(format!(
                    "expected 4 tab-separated fields, got {}",
                    fields.len()
                )));
            };
            let value: f64 = value
                .parse()
                .map_err(|_| err(format!("`{value}` is not a number")))?;
            let scores = table
                .entry((source.to_string(), metric.to_string()))
                .or_default();
            if scores.insert(system.to_string(), value).is_some() {
                return Err(err(format!(
                    "duplicate entry for {source}/{metric}/{system}"
                )));
            }
        }
        Ok(Self { table })
    }

    pub fn scores(&self, source: &str, metric: &str) -> Option<&Scores> {
        self.table.get(&(source.to_string(), metric.to_string()))
    }

    pub fn value(&self, source: &str, metric: &str, system: &str) -> Option<f64> {
        self.scores(source, metric)?.get(system).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, &str)> {
        self.table.keys().map(|(s, m)| (s.as_str(), m.as_str()))
    }
}
