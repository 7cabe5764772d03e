//! Rankings, rank correlation and simulator reliability.

mod fixtures;
mod kendall;
mod ranking;
mod reliability;

use std::collections::BTreeMap;

pub use fixtures::{FixtureError, PublishedScores, AGGREGATE};
pub use kendall::{kendall_tau_b, tau_b_on_intersection, Correlation};
pub use ranking::{rank_systems, RankedSystem, Ranking};
pub use reliability::{reliability_report, ReliabilityReport};

/// System scores keyed by CRS id.
pub type Scores = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least 2 systems, got {0}")]
    TooFewSystems(usize),
    #[error("score maps cover different systems (only in first: {only_x:?}; only in second: {only_y:?})")]
    MismatchedIds {
        only_x: Vec<String>,
        only_y: Vec<String>,
    },
    #[error("Kendall tau is undefined: all scores in the {0} argument are tied")]
    AllTied(&'static str),
    #[error("no systems in common between the compared score maps")]
    EmptyIntersection,
    #[error("score for `{0}` is not a finite number")]
    NonFinite(String),
}

fn check_finite(scores: &Scores) -> Result<(), AnalysisError> {
    match scores.iter().find(|(_, v)| !v.is_finite()) {
        Some((id, _)) => Err(AnalysisError::NonFinite(id.clone())),
        None => Ok(()),
    }
}

/// Restricts `maps` to the ids present in all of them. Returns the restricted
/// maps and the ids that were dropped.
pub fn intersect(maps: &[&Scores]) -> (Vec<Scores>, Vec<String>) {
    let mut dropped = std::collections::BTreeSet::new();
    let keep = |id: &String| maps.iter().all(|m| m.contains_key(id));
    for m in maps {
        dropped.extend(m.keys().filter(|id| !keep(id)).cloned());
    }
    let restricted = maps
        .iter()
        .map(|m| {
            m.iter()
                .filter(|(id, _)| keep(id))
                .map(|(k, v)| (k.clone(), *v))
                .collect()
        })
        .collect();
    (restricted, dropped.into_iter().collect())
}
