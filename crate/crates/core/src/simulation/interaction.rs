use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{IntentSchema, Speaker};

use super::SimulationError;

/// Pseudo-intent that ends the conversation.
pub const BYE: &str = "Bye";
/// Row label for the opening turn.
pub const START: &str = "<start>";

const BUNDLED: &str = include_str!("../../data/interaction_model.tsv");
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    Handcrafted,
    DataDerived,
    Mixed,
}

/// Markov table from the last system intent to the next user intent.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionModel {
    /// Column labels: user intents, possibly including [`BYE`].
    pub intents: Vec<String>,
    pub initial: Vec<f64>,
    pub transitions: BTreeMap<String, Vec<f64>>,
    pub source: ModelSource,
}

impl InteractionModel {
    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED).expect("bundled interaction model is well formed")
    }

    /// Parses a tab-separated table. The header row names the user intents;
    /// each following row starts with a system intent (or `<start>` for the
    /// opening distribution). A `# source: <kind>` comment sets the source.
    pub fn from_tsv(text: &str) -> Result<Self, SimulationError> {
        let mut source = ModelSource::Handcrafted;
        let mut intents: Option<Vec<String>> = None;
        let mut initial = None;
        let mut transitions = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: String| SimulationError::Model(format!("line {}: {msg}", i + 1));
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(kind) = comment.trim().strip_prefix("source:") {
                    source = match kind.trim() {
                        "handcrafted" => ModelSource::Handcrafted,
                        "data-derived" => ModelSource::DataDerived,
                        "mixed" => ModelSource::Mixed,
                        other => return Err(err(format!("unknown source `{other}`"))),
                    };
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let Some(columns) = &intents else {
                intents = Some(fields[1..].iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != columns.len() + 1 {
                return Err(err(format!(
                    "expected {} columns, got {}",
                    columns.len() + 1,
                    fields.len()
                )));
            }
            let row: Vec<f64> = fields[1..]
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| err(format!("`{v}` is not a probability")))
                })
                .collect::<Result<_, _>>()?;
            if fields[0] == START {
                initial = Some(row);
            } else if transitions.insert(fields[0].to_string(), row).is_some() {
                return Err(err(format!("duplicate row `{}`", fields[0])));
            }
        }
        let model = Self {
            intents: intents.ok_or_else(|| SimulationError::Model("missing header row".into()))?,
            initial: initial
                .ok_or_else(|| SimulationError::Model(format!("missing `{START}` row")))?,
            transitions,
            source,
        };
        model.check_rows()?;
        Ok(model)
    }

    fn check_rows(&self) -> Result<(), SimulationError> {
        let rows = std::iter::once((START, &self.initial))
            .chain(self.transitions.iter().map(|(k, v)| (k.as_str(), v)));
        for (label, row) in rows {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SimulationError::Model(format!(
                    "row `{label}` has a value outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(SimulationError::Model(format!(
                    "row `{label}` sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Every column must be a user intent (or `Bye`) and every row a system intent.
    pub fn check_schema(&self, schema: &IntentSchema) -> Result<(), SimulationError> {
        for intent in &self.intents {
            if intent != BYE && !schema.allows(Speaker::User, intent) {
                return Err(SimulationError::Model(format!(
                    "`{intent}` is not a user intent"
                )));
            }
        }
        for intent in self.transitions.keys() {
            if !schema.allows(Speaker::System, intent) {
                return Err(SimulationError::Model(format!(
                    "row `{intent}` is not a system intent"
                )));
            }
        }
        Ok(())
    }

    pub fn row(&self, system_intent: &str) -> Option<&[f64]> {
        self.transitions.get(system_intent).map(Vec::as_slice)
    }

    /// Probability of `user_intent` following `system_intent` (or the opening
    /// turn when `None`).
    pub fn probability(&self, system_intent: Option<&str>, user_intent: &str) -> Option<f64> {
        let row = match system_intent {
            None => &self.initial[..],
            Some(s) => self.row(s)?,
        };
        let col = self.intents.iter().position(|i| i == user_intent)?;
        Some(row[col])
    }

    /// Samples a column from `row`, keeping only columns for which `allowed`
    /// holds. Returns `None` when the allowed columns carry no mass.
    pub fn sample<R: Rng>(
        &self,
        row: &[f64],
        allowed: impl Fn(&str) -> bool,
        rng: &mut R,
    ) -> Option<&str> {
        let weights: Vec<f64> = self
            .intents
            .iter()
            .zip(row)
            .map(|(intent, p)| if allowed(intent) { *p } else { 0.0 })
            .collect();
        let dist = WeightedIndex::new(&weights).ok()?;
        Some(&self.intents[dist.sample(rng)])
    }
}
