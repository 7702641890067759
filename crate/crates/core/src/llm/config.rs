use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    ChatProvider, LlmGateway, MockProvider, MockScript, OpenAiCompatibleProvider, RetryPolicy,
};
use crate::autopilot::Autopilot;

pub const ENV_API_KEY: &str = "STAGECRAFT_API_KEY";
pub const ENV_ENDPOINT: &str = "STAGECRAFT_ENDPOINT";
pub const ENV_MODEL: &str = "STAGECRAFT_MODEL";

/// Name of the built-in deterministic mock, usable wherever a playlist path is.
pub const AUTOPILOT: &str = "autopilot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[serde(rename = "http_openai_compatible")]
    HttpOpenAiCompatible,
    Mock,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::HttpOpenAiCompatible => "http_openai_compatible",
            ProviderKind::Mock => "mock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Mock fixture path, or `autopilot`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<String>,
}

fn default_model() -> String {
    "gpt-4o".into()
}

fn default_key_env() -> String {
    ENV_API_KEY.into()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("provider kind `{0}` is not registered")]
    UnknownKind(String),
    #[error("http provider needs an endpoint (set {ENV_ENDPOINT} or `endpoint`)")]
    MissingEndpoint,
    #[error("mock provider must not set an endpoint")]
    UnexpectedEndpoint,
    #[error("mock fixture {path}: {source}")]
    MockFixture {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("provider setup: {0}")]
    Provider(String),
}

impl ProviderConfig {
    pub fn mock(source: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            model: "mock".into(),
            api_key_env: default_key_env(),
            retry: RetryPolicy::immediate(3),
            timeout_secs: default_timeout(),
            mock: Some(source.into()),
        }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::HttpOpenAiCompatible,
            endpoint: Some(endpoint.into()),
            model: model.into(),
            api_key_env: default_key_env(),
            retry: RetryPolicy::default(),
            timeout_secs: default_timeout(),
            mock: None,
        }
    }

    /// Live provider settings from `STAGECRAFT_ENDPOINT` / `STAGECRAFT_MODEL`.
    pub fn from_env() -> Result<Self, ConfigError> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| ConfigError::MissingEndpoint)?;
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| default_model());
        Ok(Self::http(endpoint, model))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.kind, &self.endpoint) {
            (ProviderKind::HttpOpenAiCompatible, None) => Err(ConfigError::MissingEndpoint),
            (ProviderKind::Mock, Some(_)) => Err(ConfigError::UnexpectedEndpoint),
            _ => Ok(()),
        }
    }

    pub fn gateway(&self) -> Result<LlmGateway, ConfigError> {
        Ok(LlmGateway::new(build_provider(self)?, self.retry))
    }
}

type Factory = Box<dyn Fn(&ProviderConfig) -> Result<Arc<dyn ChatProvider>, ConfigError> + Send + Sync>;

/// Provider constructors keyed by kind name.
pub struct ProviderRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for ProviderRegistry {
    fn default() -> Self {
        let mut registry = Self {
            factories: BTreeMap::new(),
        };
        registry.register(ProviderKind::HttpOpenAiCompatible.as_str(), |config| {
            let endpoint = config.endpoint.clone().ok_or(ConfigError::MissingEndpoint)?;
            let key = std::env::var(&config.api_key_env).ok();
            let provider = OpenAiCompatibleProvider::new(
                endpoint,
                config.model.clone(),
                key,
                Duration::from_secs(config.timeout_secs),
            )
            .map_err(|e| ConfigError::Provider(e.to_string()))?;
            Ok(Arc::new(provider) as Arc<dyn ChatProvider>)
        });
        registry.register(ProviderKind::Mock.as_str(), |config| {
            let provider: Arc<dyn ChatProvider> = match config.mock.as_deref() {
                None | Some(AUTOPILOT) => Arc::new(Autopilot::default().into_provider()),
                Some(path) => {
                    let path = PathBuf::from(path);
                    let script = MockScript::load(&path)
                        .map_err(|source| ConfigError::MockFixture { path, source })?;
                    Arc::new(MockProvider::from_script(script))
                }
            };
            Ok(provider)
        });
        registry
    }
}

impl ProviderRegistry {
    pub fn register<F>(&mut self, kind: &str, factory: F)
    where
        F: Fn(&ProviderConfig) -> Result<Arc<dyn ChatProvider>, ConfigError> + Send + Sync + 'static,
    {
        self.factories.insert(kind.to_string(), Box::new(factory));
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ConfigError> {
        config.validate()?;
        let factory = self
            .factories
            .get(config.kind.as_str())
            .ok_or_else(|| ConfigError::UnknownKind(config.kind.as_str().into()))?;
        factory(config)
    }
}

pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ConfigError> {
    ProviderRegistry::default().build(config)
}
