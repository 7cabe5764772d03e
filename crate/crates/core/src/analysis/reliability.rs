use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_finite, intersect, kendall_tau_b, AnalysisError, Scores};

/// How well candidate scores (e.g. from simulated users) reproduce reference
/// scores (e.g. from real users).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub reference: String,
    pub candidate: String,
    /// τ-b of the candidate scores against satisfaction. Absent when undefined
    /// (fewer than two systems or all scores tied); a warning says why.
    pub tau_b: Option<f64>,
    /// τ-b of the reference scores against satisfaction on the same systems.
    pub reference_tau_b: Option<f64>,
    pub per_system_abs_diff: BTreeMap<String, f64>,
    pub average_abs_diff: f64,
    pub systems: Vec<String>,
    pub dropped: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Compares `candidate` with `reference` on the systems that appear in
/// `reference`, `candidate` and `satisfaction`.
pub fn reliability_report(
    reference: &Scores,
    candidate: &Scores,
    satisfaction: &Scores,
) -> Result<ReliabilityReport, AnalysisError> {
    for scores in [reference, candidate, satisfaction] {
        check_finite(scores)?;
    }
    let (maps, dropped) = intersect(&[reference, candidate, satisfaction]);
    let [reference, candidate, satisfaction] =
        <[Scores; 3]>::try_from(maps).expect("three maps in, three out");
    if reference.is_empty() {
        return Err(AnalysisError::EmptyIntersection);
    }

    let per_system_abs_diff: BTreeMap<String, f64> = reference
        .iter()
        .map(|(id, r)| (id.clone(), (r - candidate[id]).abs()))
        .collect();
    let average_abs_diff =
        per_system_abs_diff.values().sum::<f64>() / per_system_abs_diff.len() as f64;

    let mut warnings = Vec::new();
    let mut tau = |scores: &Scores, label: &str| match kendall_tau_b(scores, &satisfaction) {
        Ok(t) => Some(t),
        Err(e) => {
            warnings.push(format!("{label} tau_b undefined: {e}"));
            None
        }
    };
    let tau_b = tau(&candidate, "candidate");
    let reference_tau_b = tau(&reference, "reference");

    Ok(ReliabilityReport {
        reference: "reference".into(),
        candidate: "candidate".into(),
        tau_b,
        reference_tau_b,
        per_system_abs_diff,
        average_abs_diff,
        systems: reference.keys().cloned().collect(),
        dropped,
        warnings,
    })
}

impl ReliabilityReport {
    pub fn named(mut self, reference: impl Into<String>, candidate: impl Into<String>) -> Self {
        self.reference = reference.into();
        self.candidate = candidate.into();
        self
    }

    /// Checks a serialized report: required keys and types, diffs
    /// non-negative, average equal to the mean of the diffs, τ in [−1, 1].
    pub fn validate_json(value: &Value) -> Result<(), String> {
        let obj = value.as_object().ok_or("report is not an object")?;
        for key in ["reference", "candidate"] {
            obj.get(key)
                .and_then(Value::as_str)
                .ok_or(format!("`{key}` must be a string"))?;
        }
        for key in ["tau_b", "reference_tau_b"] {
            match obj.get(key) {
                Some(Value::Null) | None => {}
                Some(v) => {
                    let t = v
                        .as_f64()
                        .ok_or(format!("`{key}` must be a number or null"))?;
                    if !(-1.0..=1.0).contains(&t) {
                        return Err(format!("`{key}` = {t} outside [-1, 1]"));
                    }
                }
            }
        }
        let diffs = obj
            .get("per_system_abs_diff")
            .and_then(Value::as_object)
            .ok_or("`per_system_abs_diff` must be an object")?;
        if diffs.is_empty() {
            return Err("`per_system_abs_diff` is empty".into());
        }
        let mut sum = 0.0;
        for (id, v) in diffs {
            let d = v
                .as_f64()
                .ok_or(format!("diff for `{id}` must be a number"))?;
            if d < 0.0 {
                return Err(format!("diff for `{id}` is negative"));
            }
            sum += d;
        }
        let average = obj
            .get("average_abs_diff")
            .and_then(Value::as_f64)
            .ok_or("`average_abs_diff` must be a number")?;
        if (average - sum / diffs.len() as f64).abs() > 1e-12 {
            return Err("`average_abs_diff` is not the mean of the per-system diffs".into());
        }
        let systems = obj
            .get("systems")
            .and_then(Value::as_array)
            .ok_or("`systems` must be an array")?;
        if systems.len() != diffs.len()
            || !systems
                .iter()
                .all(|s| s.as_str().is_some_and(|s| diffs.contains_key(s)))
        {
            return Err("`systems` does not match the per-system diffs".into());
        }
        obj.get("dropped")
            .and_then(Value::as_array)
            .ok_or("`dropped` must be an array")?;
        Ok(())
    }
}
