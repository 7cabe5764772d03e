use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Speaker;

pub const ACCEPT: &str = "Accept";
pub const REJECT: &str = "Reject";
pub const RECOMMEND: &str = "Recommend";
/// Fallback label. It is the only label allowed in both roles.
pub const OTHER: &str = "Other";

/// Closed set of intent labels, split by speaker role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSchema {
    user: BTreeSet<String>,
    system: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("user intents must include `{0}`")]
    MissingUserIntent(&'static str),
    #[error("system intents must include `{0}`")]
    MissingSystemIntent(&'static str),
    #[error("intent `{0}` is declared for both user and system")]
    SharedLabel(String),
    #[error("intent labels must be non-empty")]
    EmptyLabel,
    #[error("cannot read schema: {0}")]
    Parse(String),
}

impl IntentSchema {
    pub fn new<U, S>(user: U, system: S) -> Result<Self, SchemaError>
    where
        U: IntoIterator,
        U::Item: Into<String>,
        S: IntoIterator,
        S::Item: Into<String>,
    {
        let schema = Self {
            user: user.into_iter().map(Into::into).collect(),
            system: system.into_iter().map(Into::into).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Reads a schema from JSON text `{"user": [...], "system": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: IntentSchema =
            serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if self
            .user
            .iter()
            .chain(&self.system)
            .any(|l| l.trim().is_empty())
        {
            return Err(SchemaError::EmptyLabel);
        }
        for required in [ACCEPT, REJECT] {
            if !self.user.contains(required) {
                return Err(SchemaError::MissingUserIntent(required));
            }
        }
        if !self.system.contains(RECOMMEND) {
            return Err(SchemaError::MissingSystemIntent(RECOMMEND));
        }
        if let Some(shared) = self
            .user
            .intersection(&self.system)
            .find(|label| label.as_str() != OTHER)
        {
            return Err(SchemaError::SharedLabel(shared.clone()));
        }
        Ok(())
    }

    pub fn user_intents(&self) -> impl Iterator<Item = &str> {
        self.user.iter().map(String::as_str)
    }

    pub fn system_intents(&self) -> impl Iterator<Item = &str> {
        self.system.iter().map(String::as_str)
    }

    pub fn intents_for(&self, speaker: Speaker) -> impl Iterator<Item = &str> {
        match speaker {
            Speaker::User => self.user.iter(),
            Speaker::System => self.system.iter(),
        }
        .map(String::as_str)
    }

    pub fn allows(&self, speaker: Speaker, intent: &str) -> bool {
        match speaker {
            Speaker::User => self.user.contains(intent),
            Speaker::System => self.system.contains(intent),
        }
    }

    pub fn contains(&self, intent: &str) -> bool {
        self.user.contains(intent) || self.system.contains(intent)
    }
}

impl Default for IntentSchema {
    fn default() -> Self {
        Self::new(
            ["Disclose", "Refine", "Inquire", ACCEPT, REJECT, OTHER],
            [RECOMMEND, "Explain", "Request", "Respond", OTHER],
        )
        .expect("default schema is valid")
    }
}

impl fmt::Display for IntentSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let user: Vec<_> = self.user_intents().collect();
        let system: Vec<_> = self.system_intents().collect();
        write!(
            f,
            "USER: {}; SYSTEM: {}",
            user.join(", "),
            system.join(", ")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_has_required_labels() {
        let schema = IntentSchema::default();
        assert!(schema.allows(Speaker::User, ACCEPT));
        assert!(schema.allows(Speaker::User, REJECT));
        assert!(schema.allows(Speaker::System, RECOMMEND));
        assert!(!schema.allows(Speaker::System, ACCEPT));
        assert!(schema.allows(Speaker::System, OTHER) && schema.allows(Speaker::User, OTHER));
    }

    #[test]
    fn rejects_missing_and_shared_labels() {
        assert_eq!(
            IntentSchema::new(["Accept"], ["Recommend"]),
            Err(SchemaError::MissingUserIntent(REJECT))
        );
        assert_eq!(
            IntentSchema::new(["Accept", "Reject"], ["Explain"]),
            Err(SchemaError::MissingSystemIntent(RECOMMEND))
        );
        assert_eq!(
            IntentSchema::new(["Accept", "Reject", "Chit"], ["Recommend", "Chit"]),
            Err(SchemaError::SharedLabel("Chit".into()))
        );
    }

    #[test]
    fn parses_json_schema() {
        let schema = IntentSchema::from_json(
            r#"{"user": ["Accept", "Reject", "Bye"], "system": ["Recommend", "Greet"]}"#,
        )
        .unwrap();
        assert!(schema.allows(Speaker::User, "Bye"));
        assert!(!schema.contains("Disclose"));
    }
}
