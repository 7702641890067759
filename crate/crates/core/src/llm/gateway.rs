use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CallRole, ChatProvider, ChatRequest, ProviderFailure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry; doubles per attempt, plus up to one base of jitter.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_base_ms: 500,
        }
    }
}

impl RetryPolicy {
    /// No sleeping between attempts; used by offline runs.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            backoff_base_ms: 0,
        }
    }

    fn delay_before(&self, attempt: u32) -> Duration {
        if self.backoff_base_ms == 0 || attempt <= 1 {
            return Duration::ZERO;
        }
        let exp = self.backoff_base_ms.saturating_mul(1 << (attempt - 2).min(16));
        let jitter = rand::rng().random_range(0..self.backoff_base_ms);
        Duration::from_millis(exp + jitter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenCounts {
    pub prompt: Option<u32>,
    pub completion: Option<u32>,
}

/// One attempt against the provider, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub seq: u64,
    pub request: ChatRequest,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub provider_tag: String,
    pub latency_ms: u64,
    pub token_counts: TokenCounts,
}

impl ChatExchange {
    pub fn succeeded(&self) -> bool {
        self.response.is_some()
    }
}

/// Append-only, shareable exchange sink.
#[derive(Debug, Clone, Default)]
pub struct ExchangeLog {
    inner: Arc<Mutex<Vec<ChatExchange>>>,
}

impl ExchangeLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn append(&self, mut exchange: ChatExchange) -> u64 {
        let mut entries = self.inner.lock().expect("exchange log poisoned");
        exchange.seq = entries.len() as u64;
        let seq = exchange.seq;
        entries.push(exchange);
        seq
    }

    pub fn snapshot(&self) -> Vec<ChatExchange> {
        self.inner.lock().expect("exchange log poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("exchange log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn successes(&self) -> usize {
        self.snapshot().iter().filter(|e| e.succeeded()).count()
    }

    pub fn successes_for(&self, role: CallRole) -> usize {
        self.snapshot()
            .iter()
            .filter(|e| e.succeeded() && e.request.role == role)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("provider unavailable after {attempts} attempt(s): {last}")]
    ProviderUnavailable { attempts: u32, last: String },
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("provider returned an empty completion after {attempts} attempt(s)")]
    Contract { attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
    pub exchange_seq: u64,
}

/// Provider plus retry policy plus exchange log.
#[derive(Clone)]
pub struct LlmGateway {
    provider: Arc<dyn ChatProvider>,
    policy: RetryPolicy,
    log: ExchangeLog,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway")
            .field("provider", &self.provider.tag())
            .field("policy", &self.policy)
            .field("exchanges", &self.log.len())
            .finish()
    }
}

impl LlmGateway {
    pub fn new(provider: Arc<dyn ChatProvider>, policy: RetryPolicy) -> Self {
        Self {
            provider,
            policy,
            log: ExchangeLog::new(),
        }
    }

    pub fn with_log(mut self, log: ExchangeLog) -> Self {
        self.log = log;
        self
    }

    pub fn log(&self) -> &ExchangeLog {
        &self.log
    }

    pub fn policy(&self) -> RetryPolicy {
        self.policy
    }

    /// Sends `request`, retrying transient failures and empty completions.
    pub fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        let max = self.policy.max_attempts.max(1);
        let tag = self.provider.tag();
        let mut last_failure = String::new();
        let mut empty_only = true;

        for attempt in 1..=max {
            let delay = self.policy.delay_before(attempt);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
            let started = Instant::now();
            let outcome = self.provider.send(request);
            let latency_ms = started.elapsed().as_millis() as u64;
            let mut exchange = ChatExchange {
                seq: 0,
                request: request.clone(),
                attempt,
                response: None,
                error: None,
                provider_tag: tag.clone(),
                latency_ms,
                token_counts: TokenCounts::default(),
            };

            match outcome {
                Ok(reply) if !reply.text.trim().is_empty() => {
                    exchange.token_counts = TokenCounts {
                        prompt: reply.prompt_tokens,
                        completion: reply.completion_tokens,
                    };
                    exchange.response = Some(reply.text.clone());
                    let seq = self.log.append(exchange);
                    return Ok(Completion {
                        text: reply.text,
                        attempts: attempt,
                        exchange_seq: seq,
                    });
                }
                Ok(_) => {
                    exchange.error = Some("empty completion".into());
                    self.log.append(exchange);
                    last_failure = "empty completion".into();
                }
                Err(ProviderFailure::Auth(msg)) => {
                    exchange.error = Some(format!("auth: {msg}"));
                    self.log.append(exchange);
                    return Err(GatewayError::Auth(msg));
                }
                Err(ProviderFailure::Fatal(msg)) => {
                    exchange.error = Some(format!("fatal: {msg}"));
                    self.log.append(exchange);
                    return Err(GatewayError::ProviderUnavailable {
                        attempts: attempt,
                        last: msg,
                    });
                }
                Err(ProviderFailure::Transient(msg)) => {
                    tracing::debug!(attempt, %msg, "transient provider failure");
                    exchange.error = Some(format!("transient: {msg}"));
                    self.log.append(exchange);
                    last_failure = msg;
                    empty_only = false;
                }
            }
        }

        if empty_only {
            Err(GatewayError::Contract { attempts: max })
        } else {
            Err(GatewayError::ProviderUnavailable {
                attempts: max,
                last: last_failure,
            })
        }
    }
}
