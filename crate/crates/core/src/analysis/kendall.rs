use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_finite, intersect, AnalysisError, Scores};

/// Kendall's τ-b between two score maps over the same systems:
/// `(C − D) / sqrt((n0 − tx)(n0 − ty))` where `n0 = n(n−1)/2` and `tx`, `ty`
/// count pairs tied in `x` and `y`.
pub fn kendall_tau_b(x: &Scores, y: &Scores) -> Result<f64, AnalysisError> {
    if x.keys().ne(y.keys()) {
        return Err(AnalysisError::MismatchedIds {
            only_x: x.keys().filter(|k| !y.contains_key(*k)).cloned().collect(),
            only_y: y.keys().filter(|k| !x.contains_key(*k)).cloned().collect(),
        });
    }
    if x.len() < 2 {
        return Err(AnalysisError::TooFewSystems(x.len()));
    }
    check_finite(x)?;
    check_finite(y)?;
    let pairs: Vec<(f64, f64)> = x.iter().map(|(id, v)| (*v, y[id])).collect();

    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let dx = pairs[i].0.total_cmp(&pairs[j].0);
            let dy = pairs[i].1.total_cmp(&pairs[j].1);
            match (dx, dy) {
                (Ordering::Equal, Ordering::Equal) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (Ordering::Equal, _) => tied_x += 1,
                (_, Ordering::Equal) => tied_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (pairs.len() * (pairs.len() - 1) / 2) as i64;
    if tied_x == n0 {
        return Err(AnalysisError::AllTied("first"));
    }
    if tied_y == n0 {
        return Err(AnalysisError::AllTied("second"));
    }
    let denominator = (((n0 - tied_x) * (n0 - tied_y)) as f64).sqrt();
    Ok((concordant - discordant) as f64 / denominator)
}

/// τ-b over the systems both maps share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub tau_b: f64,
    pub systems: Vec<String>,
    pub dropped: Vec<String>,
}

pub fn tau_b_on_intersection(x: &Scores, y: &Scores) -> Result<Correlation, AnalysisError> {
    let (maps, dropped) = intersect(&[x, y]);
    if maps[0].is_empty() {
        return Err(AnalysisError::EmptyIntersection);
    }
    Ok(Correlation {
        tau_b: kendall_tau_b(&maps[0], &maps[1])?,
        systems: maps[0].keys().cloned().collect(),
        dropped,
    })
}
