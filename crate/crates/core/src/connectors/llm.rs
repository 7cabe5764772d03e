use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("LLM request timed out")]
    Timeout,
    #[error("LLM endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM response could not be read: {0}")]
    Malformed(String),
    #[error("mock script exhausted after {calls} call(s)")]
    ScriptExhausted { calls: usize },
    #[error("invalid gateway configuration: {0}")]
    Config(String),
}

impl GatewayError {
    fn is_transient(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A chat-completion backend. Implementations must tolerate concurrent calls.
pub trait LlmGateway: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError>;
}

impl<T: LlmGateway + ?Sized> LlmGateway for &T {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        (**self).complete(messages)
    }
}

impl<T: LlmGateway + ?Sized> LlmGateway for std::sync::Arc<T> {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayOptions {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub streaming: bool,
    #[serde(default = "default_timeout", with = "duration_ms")]
    pub timeout: Duration,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Bearer token; taken from the environment, never from config files.
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_timeout() -> Duration {
    Duration::from_secs(60)
}

fn default_retries() -> u32 {
    2
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl GatewayOptions {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: 0.0,
            streaming: false,
            timeout: default_timeout(),
            max_retries: default_retries(),
            api_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.is_empty() {
            return Err(GatewayError::Config("empty endpoint".into()));
        }
        if self.model.is_empty() {
            return Err(GatewayError::Config("empty model identifier".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Config(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if self.streaming {
            return Err(GatewayError::Config(
                "streamed responses are not supported".into(),
            ));
        }
        Ok(())
    }

    /// Request body for the chat-completion wire contract.
    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "stream": self.streaming,
            "options": { "temperature": self.temperature },
        })
    }
}

/// Pulls the generated text out of the common chat-completion response shapes.
pub fn extract_completion(body: &Value) -> Option<String> {
    let pointers = [
        "/message/content",
        "/choices/0/message/content",
        "/choices/0/text",
        "/response",
        "/text",
    ];
    pointers
        .iter()
        .find_map(|p| body.pointer(p).and_then(Value::as_str))
        .map(str::to_string)
}

/// Live gateway speaking JSON over HTTP.
pub struct HttpGateway {
    options: GatewayOptions,
    agent: ureq::Agent,
}

impl HttpGateway {
    pub fn new(options: GatewayOptions) -> Result<Self, GatewayError> {
        options.validate()?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            options,
            agent: ureq::Agent::new_with_config(config),
        })
    }

    pub fn options(&self) -> &GatewayOptions {
        &self.options
    }

    fn call_once(&self, body: &Value) -> Result<String, GatewayError> {
        let mut request = self.agent.post(&self.options.endpoint);
        if let Some(key) = &self.options.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(map_transport)?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Status { status, body: text });
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Malformed(format!("{e}: {text}")))?;
        extract_completion(&value).ok_or(GatewayError::Malformed(text))
    }
}

pub(crate) fn map_transport(err: ureq::Error) -> GatewayError {
    match err {
        ureq::Error::Timeout(_) => GatewayError::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => GatewayError::Timeout,
        other => GatewayError::Transport(other.to_string()),
    }
}

impl LlmGateway for HttpGateway {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let body = self.options.request_body(messages);
        let mut attempt = 0;
        loop {
            match self.call_once(&body) {
                Err(e) if e.is_transient() && attempt < self.options.max_retries => {
                    attempt += 1;
                    log::warn!(
                        "LLM call failed ({e}), retry {attempt}/{}",
                        self.options.max_retries
                    );
                }
                result => return result,
            }
        }
    }
}

/// Replays a fixed list of replies in order and records every prompt it sees.
#[derive(Debug, Default)]
pub struct ScriptedGateway {
    replies: Mutex<VecDeque<String>>,
    calls: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedGateway {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.calls.lock().expect("poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("poisoned").len()
    }
}

impl LlmGateway for ScriptedGateway {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let mut calls = self.calls.lock().expect("poisoned");
        calls.push(messages.to_vec());
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .ok_or(GatewayError::ScriptExhausted { calls: calls.len() })
    }
}

/// Answers by pattern: the first rule whose pattern occurs in the last
/// message wins. The reply depends only on the prompt, so concurrent sessions
/// stay deterministic.
#[derive(Debug, Clone, Default)]
pub struct PatternGateway {
    rules: Vec<(String, String)>,
    fallback: Option<String>,
}

impl PatternGateway {
    pub fn new(rules: Vec<(String, String)>, fallback: Option<String>) -> Self {
        Self { rules, fallback }
    }

    /// Parses `pattern<TAB>reply` lines. A `*` pattern sets the fallback.
    /// Blank lines and lines starting with `#` are skipped. `\n` in a reply
    /// is unescaped to a newline.
    pub fn from_table(text: &str) -> Result<Self, GatewayError> {
        let mut rules = Vec::new();
        let mut fallback = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (pattern, reply) = line.split_once('\t').ok_or_else(|| {
                GatewayError::Config(format!("script line {}: expected pattern<TAB>reply", i + 1))
            })?;
            let reply = reply.replace("\\n", "\n");
            if pattern == "*" {
                fallback = Some(reply);
            } else {
                rules.push((pattern.to_string(), reply));
            }
        }
        Ok(Self { rules, fallback })
    }
}

impl LlmGateway for PatternGateway {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GatewayError> {
        let last = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        self.rules
            .iter()
            .find(|(pattern, _)| last.contains(pattern.as_str()))
            .map(|(_, reply)| reply.clone())
            .or_else(|| self.fallback.clone())
            .ok_or(GatewayError::ScriptExhausted { calls: 1 })
    }
}
