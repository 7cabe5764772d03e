//! Boundary adapters: chat-completion gateways and CRS connectors, each with
//! a live HTTP implementation and deterministic offline doubles.

mod crs;
mod llm;

pub use crs::{
    CrsConnector, CrsEndpoint, CrsError, CrsReply, FieldMapping, HttpCrs, SessionMode,
    StubBehavior, StubCrs,
};
pub use llm::{
    extract_completion, ChatMessage, GatewayError, GatewayOptions, HttpGateway, LlmGateway,
    PatternGateway, Role, ScriptedGateway,
};

/// Environment variable holding the chat-completion endpoint URL.
pub const ENV_LLM_ENDPOINT: &str = "EVALKIT_LLM_ENDPOINT";
/// Environment variable holding the model identifier.
pub const ENV_LLM_MODEL: &str = "EVALKIT_LLM_MODEL";
/// Environment variable holding an optional bearer token.
pub const ENV_LLM_API_KEY: &str = "EVALKIT_LLM_API_KEY";
