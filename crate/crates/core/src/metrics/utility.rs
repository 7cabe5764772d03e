use std::fmt;
use std::sync::Arc;

use crate::dialogue::Dialogue;

use super::{accepted_items, accepted_rounds, round_count, success, MetricError};

type Evaluator = Arc<dyn Fn(&Dialogue) -> f64 + Send + Sync>;

/// One weighted term of a reward or cost sum.
#[derive(Clone)]
pub struct Factor {
    name: String,
    weight: f64,
    evaluator: Evaluator,
}

pub type RewardFactor = Factor;
pub type CostFactor = Factor;

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factor")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

impl Factor {
    /// `evaluator` must return a non-negative value for every valid dialogue.
    pub fn new<F>(name: impl Into<String>, weight: f64, evaluator: F) -> Result<Self, MetricError>
    where
        F: Fn(&Dialogue) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        if !weight.is_finite() || weight < 0.0 {
            return Err(MetricError::InvalidFactor(format!(
                "factor `{name}` has weight {weight}; weights must be finite and non-negative"
            )));
        }
        Ok(Self {
            name,
            weight,
            evaluator: Arc::new(evaluator),
        })
    }

    fn unit<F>(name: &str, evaluator: F) -> Self
    where
        F: Fn(&Dialogue) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, 1.0, evaluator).expect("unit weight is valid")
    }

    /// Number of accepted items, |I_acc|.
    pub fn accepted_items() -> Self {
        Self::unit("accepted_items", |d| accepted_items(d) as f64)
    }

    /// Number of utterances from both participants, |d|.
    pub fn dialogue_length() -> Self {
        Self::unit("dialogue_length", |d| d.len() as f64)
    }

    /// Rounds that ended with an acceptance.
    pub fn accepted_rounds() -> Self {
        Self::unit("accepted_rounds", |d| accepted_rounds(d) as f64)
    }

    pub fn round_count() -> Self {
        Self::unit("round_count", |d| round_count(d) as f64)
    }

    /// 1 when the dialogue contains a user acceptance, else 0.
    pub fn success() -> Self {
        Self::unit("success", |d| if success(d) { 1.0 } else { 0.0 })
    }

    pub fn constant(value: f64) -> Result<Self, MetricError> {
        if !value.is_finite() || value < 0.0 {
            return Err(MetricError::InvalidFactor(format!(
                "constant factor {value} must be non-negative"
            )));
        }
        Ok(Self::unit("constant", move |_| value))
    }

    pub fn with_weight(self, weight: f64) -> Result<Self, MetricError> {
        Self::new(self.name, weight, move |d| (self.evaluator)(d))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn evaluate(&self, dialogue: &Dialogue) -> Result<f64, MetricError> {
        let value = (self.evaluator)(dialogue);
        if !value.is_finite() || value < 0.0 {
            return Err(MetricError::InvalidFactor(format!(
                "factor `{}` produced {value} on dialogue `{}`",
                self.name, dialogue.dialogue_id
            )));
        }
        Ok(value)
    }
}

fn weighted_sum(dialogue: &Dialogue, factors: &[Factor]) -> Result<f64, MetricError> {
    let mut terms = factors
        .iter()
        .map(|f| f.evaluate(dialogue).map(|v| f.weight * v));
    let first = match terms.next() {
        Some(t) => t?,
        None => return Ok(0.0),
    };
    terms.try_fold(first, |acc, t| Ok(acc + t?))
}

/// Weighted reward over weighted cost for one conversation.
pub fn utility(
    dialogue: &Dialogue,
    rewards: &[RewardFactor],
    costs: &[CostFactor],
) -> Result<f64, MetricError> {
    let cost = weighted_sum(dialogue, costs)?;
    if cost <= 0.0 {
        return Err(MetricError::ZeroCost(dialogue.dialogue_id.clone()));
    }
    let reward = weighted_sum(dialogue, rewards)?;
    Ok(reward / cost)
}
