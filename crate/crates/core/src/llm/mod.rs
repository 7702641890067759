//! Every LLM call flows through here: the provider contract, the retrying
//! gateway, structured-output extraction and the offline mock provider.

mod config;
mod decision;
mod extract;
mod gateway;
mod http;
mod mock;

pub use config::{
    build_provider, ConfigError, ProviderConfig, ProviderKind, ProviderRegistry, AUTOPILOT,
    ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub(crate) use decision::check_strategy;
pub use decision::{
    extract_structured_decision, parse_keyed, DecisionPayload, InputClass, KeyedResponse,
    MalformedDecision, Strategy, DECISION_KEYS,
};
pub use extract::{extract_tagged_block, sections, MissingSection, TaggedBlock};
pub use gateway::{
    ChatExchange, Completion, ExchangeLog, GatewayError, LlmGateway, RetryPolicy, TokenCounts,
};
pub use http::OpenAiCompatibleProvider;
pub use mock::{MockFailure, MockProvider, MockReply, MockScript, MockStub};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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

/// What a call is for. Drives decoding defaults, ledgers and mock routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallRole {
    Writer,
    Critic,
    Reviser,
    Judge,
    Refiner,
    Transformer,
    Director,
    Actor,
    Global,
    Reflection,
    Classifier,
    Player,
}

impl CallRole {
    pub const ALL: [CallRole; 12] = [
        CallRole::Writer,
        CallRole::Critic,
        CallRole::Reviser,
        CallRole::Judge,
        CallRole::Refiner,
        CallRole::Transformer,
        CallRole::Director,
        CallRole::Actor,
        CallRole::Global,
        CallRole::Reflection,
        CallRole::Classifier,
        CallRole::Player,
    ];

    /// Creative roles sample hot, judging roles sample cold.
    pub fn default_temperature(self) -> f32 {
        match self {
            CallRole::Writer
            | CallRole::Reviser
            | CallRole::Refiner
            | CallRole::Actor
            | CallRole::Global
            | CallRole::Player => 0.8,
            CallRole::Critic
            | CallRole::Judge
            | CallRole::Transformer
            | CallRole::Director
            | CallRole::Reflection
            | CallRole::Classifier => 0.2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CallRole::Writer => "writer",
            CallRole::Critic => "critic",
            CallRole::Reviser => "reviser",
            CallRole::Judge => "judge",
            CallRole::Refiner => "refiner",
            CallRole::Transformer => "transformer",
            CallRole::Director => "director",
            CallRole::Actor => "actor",
            CallRole::Global => "global",
            CallRole::Reflection => "reflection",
            CallRole::Classifier => "classifier",
            CallRole::Player => "player",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f32,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-call model override, e.g. distinct judge models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl DecodingParams {
    pub fn for_role(role: CallRole) -> Self {
        Self {
            temperature: role.default_temperature(),
            max_tokens: 2048,
            seed: None,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: CallRole,
    pub messages: Vec<ChatMessage>,
    pub params: DecodingParams,
}

impl ChatRequest {
    pub fn new(role: CallRole, messages: Vec<ChatMessage>) -> Self {
        Self {
            role,
            messages,
            params: DecodingParams::for_role(role),
        }
    }

    /// System prompt plus one user turn.
    pub fn prompt(role: CallRole, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self::new(role, vec![ChatMessage::system(system), ChatMessage::user(user)])
    }

    pub fn with_model(mut self, model: Option<String>) -> Self {
        self.params.model = model;
        self
    }

    /// Hex SHA-256 over the role and messages; decoding params excluded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.role.as_str().as_bytes());
        for m in &self.messages {
            hasher.update([0u8]);
            hasher.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
            hasher.update([0u8]);
            hasher.update(m.content.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// All message contents joined, for prompt audits.
    pub fn transcript(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Content of the last user message.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

impl ProviderReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderFailure {
    /// 429, 5xx, timeouts and dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    /// 401 / 403.
    #[error("auth: {0}")]
    Auth(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

/// A chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn tag(&self) -> String;
    fn send(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderFailure>;
}
