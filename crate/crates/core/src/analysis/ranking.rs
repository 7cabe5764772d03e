use serde::{Deserialize, Serialize};

use super::{check_finite, AnalysisError, Scores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSystem {
    pub crs_id: String,
    pub score: f64,
    pub rank: f64,
}

/// Systems ordered by score, best first. Tied systems share the average of
/// the ranks they span and are listed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedSystem>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.crs_id.as_str()).collect()
    }

    pub fn ranks(&self) -> Scores {
        self.entries
            .iter()
            .map(|e| (e.crs_id.clone(), e.rank))
            .collect()
    }

    pub fn rank_of(&self, crs_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.crs_id == crs_id)
            .map(|e| e.rank)
    }
}

pub fn rank_systems(scores: &Scores) -> Result<Ranking, AnalysisError> {
    if scores.len() < 2 {
        return Err(AnalysisError::TooFewSystems(scores.len()));
    }
    check_finite(scores)?;
    let mut sorted: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut entries = Vec::with_capacity(sorted.len());
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].1 == sorted[start].1 {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for (id, score) in &sorted[start..end] {
            entries.push(RankedSystem {
                crs_id: (*id).clone(),
                score: *score,
                rank,
            });
        }
        start = end;
    }
    Ok(Ranking { entries })
}
