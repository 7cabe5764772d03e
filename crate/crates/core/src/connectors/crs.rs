use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::llm::map_transport;
use super::GatewayError;

/// One CRS turn as seen by the harness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrsReply {
    pub text: String,
    /// Recommended item ids, when the CRS reports them in a structured field.
    pub items: Vec<String>,
    pub end: bool,
}

impl CrsReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            items: Vec::new(),
            end: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrsError {
    #[error("CRS request timed out")]
    Timeout,
    #[error("CRS transport error: {0}")]
    Transport(String),
    #[error("CRS returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed CRS response ({reason}): {raw}")]
    Malformed { reason: String, raw: String },
    #[error("CRS failure: {0}")]
    Fault(String),
}

impl From<GatewayError> for CrsError {
    fn from(err: GatewayError) -> Self {
        match err {
            GatewayError::Timeout => CrsError::Timeout,
            other => CrsError::Transport(other.to_string()),
        }
    }
}

/// A conversational recommender reachable by session. Calls within one
/// session are serialized by the caller.
pub trait CrsConnector: Send + Sync {
    fn crs_id(&self) -> &str;

    fn send(&self, session: &str, utterance: &str, timeout: Duration)
        -> Result<CrsReply, CrsError>;
}

impl<T: CrsConnector + ?Sized> CrsConnector for &T {
    fn crs_id(&self) -> &str {
        (**self).crs_id()
    }

    fn send(
        &self,
        session: &str,
        utterance: &str,
        timeout: Duration,
    ) -> Result<CrsReply, CrsError> {
        (**self).send(session, utterance, timeout)
    }
}

impl<T: CrsConnector + ?Sized> CrsConnector for std::sync::Arc<T> {
    fn crs_id(&self) -> &str {
        (**self).crs_id()
    }

    fn send(
        &self,
        session: &str,
        utterance: &str,
        timeout: Duration,
    ) -> Result<CrsReply, CrsError> {
        (**self).send(session, utterance, timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubBehavior {
    /// Recommends the same item on every turn.
    AlwaysRecommend { item: String },
    /// Replies with the user's text.
    Echo,
    /// Ends the conversation on the first turn.
    Goodbye,
    /// Says the same sentence forever.
    Repeat { text: String },
}

/// Deterministic offline CRS used in tests and dry runs.
#[derive(Debug, Clone)]
pub struct StubCrs {
    crs_id: String,
    behavior: StubBehavior,
}

impl StubCrs {
    pub fn new(crs_id: impl Into<String>, behavior: StubBehavior) -> Self {
        Self {
            crs_id: crs_id.into(),
            behavior,
        }
    }

    pub fn behavior(&self) -> &StubBehavior {
        &self.behavior
    }
}

impl CrsConnector for StubCrs {
    fn crs_id(&self) -> &str {
        &self.crs_id
    }

    fn send(
        &self,
        _session: &str,
        utterance: &str,
        _timeout: Duration,
    ) -> Result<CrsReply, CrsError> {
        Ok(match &self.behavior {
            StubBehavior::AlwaysRecommend { item } => CrsReply {
                text: format!("You might like {item}."),
                items: vec![item.clone()],
                end: false,
            },
            StubBehavior::Echo => CrsReply::text(utterance),
            StubBehavior::Goodbye => CrsReply {
                text: "Goodbye!".into(),
                items: Vec::new(),
                end: true,
            },
            StubBehavior::Repeat { text } => CrsReply::text(text.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SessionMode {
    /// Session id sent as a body field named by `FieldMapping::session`.
    Body,
    /// Session id sent in the named header.
    Header { name: String },
}

/// Request keys and response JSON pointers for one CRS wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub session: String,
    pub message: String,
    pub reply: String,
    pub items: String,
    pub end: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        Self {
            session: "session_id".into(),
            message: "message".into(),
            reply: "/text".into(),
            items: "/items".into(),
            end: "/end".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrsEndpoint {
    pub crs_id: String,
    pub url: String,
    #[serde(default = "default_session_mode")]
    pub session_mode: SessionMode,
    #[serde(default)]
    pub fields: FieldMapping,
}

fn default_session_mode() -> SessionMode {
    SessionMode::Body
}

impl CrsEndpoint {
    pub fn new(crs_id: impl Into<String>, url: impl Into<String>) -> Self {
        Self {
            crs_id: crs_id.into(),
            url: url.into(),
            session_mode: SessionMode::Body,
            fields: FieldMapping::default(),
        }
    }

    pub fn request_body(&self, session: &str, utterance: &str) -> Value {
        let mut body = Map::new();
        if self.session_mode == SessionMode::Body {
            body.insert(self.fields.session.clone(), Value::String(session.into()));
        }
        body.insert(self.fields.message.clone(), Value::String(utterance.into()));
        Value::Object(body)
    }

    /// Maps a raw response body onto a [`CrsReply`]. The reply text is kept verbatim.
    pub fn parse_response(&self, raw: &str) -> Result<CrsReply, CrsError> {
        let malformed = |reason: &str| CrsError::Malformed {
            reason: reason.to_string(),
            raw: raw.to_string(),
        };
        let value: Value = serde_json::from_str(raw).map_err(|e| malformed(&e.to_string()))?;
        let text = value
            .pointer(&self.fields.reply)
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(&format!("missing string at {}", self.fields.reply)))?
            .to_string();
        let items = match value.pointer(&self.fields.items) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) if !s.is_empty() => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(malformed("item ids must be non-empty strings or numbers")),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(malformed("items field is not an array")),
        };
        let end = match value.pointer(&self.fields.end) {
            None | Some(Value::Null) => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(malformed("end flag is not a boolean")),
        };
        Ok(CrsReply { text, items, end })
    }
}

/// Live CRS over HTTP, driven entirely by a [`CrsEndpoint`] mapping.
pub struct HttpCrs {
    endpoint: CrsEndpoint,
    agent: ureq::Agent,
}

impl HttpCrs {
    pub fn new(endpoint: CrsEndpoint) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build();
        Self {
            endpoint,
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl CrsConnector for HttpCrs {
    fn crs_id(&self) -> &str {
        &self.endpoint.crs_id
    }

    fn send(
        &self,
        session: &str,
        utterance: &str,
        timeout: Duration,
    ) -> Result<CrsReply, CrsError> {
        let mut request = self
            .agent
            .post(&self.endpoint.url)
            .config()
            .timeout_global(Some(timeout))
            .build();
        if let SessionMode::Header { name } = &self.endpoint.session_mode {
            request = request.header(name.as_str(), session);
        }
        let mut response = request
            .send_json(self.endpoint.request_body(session, utterance))
            .map_err(|e| CrsError::from(map_transport(e)))?;
        let status = response.status().as_u16();
        let raw = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CrsError::from(map_transport(e)))?;
        if !(200..300).contains(&status) {
            return Err(CrsError::Status { status, body: raw });
        }
        self.endpoint.parse_response(&raw)
    }
}
