use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dialogue::{Slot, UserGoal};

use super::SimulationError;

const BUNDLED: &str = include_str!("../../data/catalog.json");

/// A recommendable item with its attribute values. Attributes may hold
/// several values (e.g. a cast list).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogItem {
    pub title: String,
    pub attributes: BTreeMap<String, Vec<String>>,
}

impl CatalogItem {
    pub fn values(&self, slot: &str) -> &[String] {
        self.attributes.get(slot).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Case-insensitive match of one attribute value.
    pub fn has(&self, slot: &str, value: &str) -> bool {
        self.values(slot)
            .iter()
            .any(|v| v.eq_ignore_ascii_case(value))
    }

    pub fn satisfies(&self, goal: &UserGoal) -> bool {
        goal.constraints.iter().all(|c| self.has(&c.slot, &c.value))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    pub items: Vec<CatalogItem>,
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

impl Catalog {
    /// A small movie catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled catalog is well formed")
    }

    /// Reads a JSON array of flat objects, or one object per line. Each
    /// object needs a `title`; other keys map to a scalar or a list of scalars.
    pub fn from_json(text: &str) -> Result<Self, SimulationError> {
        let records: Vec<Value> = match serde_json::from_str::<Value>(text) {
            Ok(Value::Array(records)) => records,
            _ => text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| {
                    serde_json::from_str(l)
                        .map_err(|e| SimulationError::Catalog(format!("line {}: {e}", i + 1)))
                })
                .collect::<Result<_, _>>()?,
        };
        let mut items = Vec::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            let err = |msg: &str| SimulationError::Catalog(format!("item {}: {msg}", i + 1));
            let obj = record.as_object().ok_or_else(|| err("not an object"))?;
            let title = obj
                .get("title")
                .and_then(Value::as_str)
                .ok_or_else(|| err("missing `title`"))?;
            let mut attributes = BTreeMap::new();
            for (key, value) in obj {
                if key == "title" {
                    continue;
                }
                let values: Vec<String> = match value {
                    Value::Array(list) => list.iter().filter_map(scalar).collect(),
                    other => scalar(other).into_iter().collect(),
                };
                if !values.is_empty() {
                    attributes.insert(key.clone(), values);
                }
            }
            items.push(CatalogItem {
                title: title.to_string(),
                attributes,
            });
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn find(&self, title: &str) -> Option<&CatalogItem> {
        self.items
            .iter()
            .find(|i| i.title.eq_ignore_ascii_case(title))
    }

    pub fn titles(&self) -> Vec<String> {
        self.items.iter().map(|i| i.title.clone()).collect()
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.items.iter().any(|i| !i.values(slot).is_empty())
    }
}

/// How many constraints and requests a goal gets, and from which slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub constraint_slots: Vec<String>,
    pub request_slots: Vec<String>,
    /// Inclusive range for the number of constraints.
    pub constraints: (usize, usize),
    /// Inclusive range for the number of requests.
    pub requests: (usize, usize),
    pub max_retries: usize,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self {
            constraint_slots: vec!["genre".into(), "year".into(), "actor".into()],
            request_slots: vec!["director".into(), "plot".into(), "rating".into()],
            constraints: (1, 2),
            requests: (1, 3),
            max_retries: 100,
        }
    }
}

/// Draws a goal whose constraints all hold for at least one catalog item:
/// an anchor item is drawn first and the constraint values are read off it.
/// Constraints and requests follow the slot order of `config`.
pub fn sample_goal(
    catalog: &Catalog,
    config: &GoalConfig,
    seed: u64,
) -> Result<UserGoal, SimulationError> {
    if catalog.is_empty() {
        return Err(SimulationError::Goal("catalog is empty".into()));
    }
    if config.constraint_slots.is_empty() {
        return Err(SimulationError::Goal(
            "no constraint slots configured".into(),
        ));
    }
    let (c_min, c_max) = config.constraints;
    let (r_min, r_max) = config.requests;
    if c_min == 0 || c_min > c_max || r_min > r_max {
        return Err(SimulationError::Goal(format!(
            "invalid count ranges: constraints {c_min}..={c_max}, requests {r_min}..={r_max}"
        )));
    }
    for slot in config.constraint_slots.iter().chain(&config.request_slots) {
        if !catalog.has_slot(slot) {
            return Err(SimulationError::Goal(format!(
                "slot `{slot}` does not occur in the catalog"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_c = rng
        .random_range(c_min..=c_max)
        .min(config.constraint_slots.len());
    for _ in 0..=config.max_retries {
        let anchor = &catalog.items[rng.random_range(0..catalog.len())];
        let available: Vec<&String> = config
            .constraint_slots
            .iter()
            .filter(|s| !anchor.values(s).is_empty())
            .collect();
        if available.len() < k_c {
            continue;
        }
        let mut picked: Vec<usize> = sample(&mut rng, available.len(), k_c).into_vec();
        picked.sort_unstable();
        let constraints: Vec<Slot> = picked
            .into_iter()
            .map(|i| {
                let values = anchor.values(available[i]);
                Slot::new(
                    available[i].clone(),
                    values[rng.random_range(0..values.len())].clone(),
                )
            })
            .collect();

        let request_pool: Vec<&String> = config
            .request_slots
            .iter()
            .filter(|s| !constraints.iter().any(|c| &&c.slot == s))
            .collect();
        let k_r = rng.random_range(r_min..=r_max).min(request_pool.len());
        let mut picked: Vec<usize> = sample(&mut rng, request_pool.len(), k_r).into_vec();
        picked.sort_unstable();
        let requests = picked
            .into_iter()
            .map(|i| request_pool[i].clone())
            .collect();
        return Ok(UserGoal {
            constraints,
            requests,
        });
    }
    Err(SimulationError::Goal(format!(
        "no catalog item offers {k_c} of the slots {:?} after {} retries",
        config.constraint_slots, config.max_retries
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_item() -> Catalog {
        Catalog::from_json(r#"[{"title": "Lion", "year": 2016, "actor": "Nicole Kidman"}]"#)
            .unwrap()
    }

    #[test]
    fn single_item_two_constraints() {
        let config = GoalConfig {
            constraint_slots: vec!["year".into(), "actor".into()],
            request_slots: vec![],
            constraints: (2, 2),
            requests: (0, 0),
            ..GoalConfig::default()
        };
        let goal = sample_goal(&single_item(), &config, 7).unwrap();
        assert_eq!(
            goal.constraints,
            vec![
                Slot::new("year", "2016"),
                Slot::new("actor", "Nicole Kidman")
            ]
        );
        assert!(goal.requests.is_empty());
    }

    #[test]
    fn same_seed_same_goal() {
        let catalog = Catalog::bundled();
        let config = GoalConfig::default();
        for seed in 0..20 {
            assert_eq!(
                sample_goal(&catalog, &config, seed).unwrap(),
                sample_goal(&catalog, &config, seed).unwrap()
            );
        }
    }

    #[test]
    fn goals_are_satisfiable_and_within_bounds() {
        let catalog = Catalog::bundled();
        let config = GoalConfig::default();
        for seed in 0..200 {
            let goal = sample_goal(&catalog, &config, seed).unwrap();
            assert!((1..=2).contains(&goal.constraints.len()));
            assert!((1..=3).contains(&goal.requests.len()));
            assert!(
                catalog.items.iter().any(|i| i.satisfies(&goal)),
                "seed {seed}: {goal:?}"
            );
            goal.validate().unwrap();
        }
    }

    #[test]
    fn unknown_slot_is_named() {
        let config = GoalConfig {
            constraint_slots: vec!["budget".into()],
            ..GoalConfig::default()
        };
        let err = sample_goal(&single_item(), &config, 0).unwrap_err();
        assert!(err.to_string().contains("budget"));
        assert!(sample_goal(&Catalog::default(), &GoalConfig::default(), 0).is_err());
    }

    #[test]
    fn catalog_parsing() {
        let c = Catalog::bundled();
        assert_eq!(c.len(), 20);
        let lion = c.find("lion").unwrap();
        assert!(lion.has("actor", "nicole kidman"));
        assert!(lion.has("year", "2016"));
        let jsonl =
            Catalog::from_json("{\"title\":\"A\",\"genre\":\"x\"}\n{\"title\":\"B\"}\n").unwrap();
        assert_eq!(jsonl.len(), 2);
        assert!(Catalog::from_json("[{\"genre\":\"x\"}]").is_err());
    }
}
