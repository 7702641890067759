//! Deterministic stand-in provider.
//!
//! Replies resolve in order: request-hash lookup table, per-role queue,
//! shared playlist, programmable stub, fallback text. Anything left
//! unresolved is a fatal failure so exhausted fixtures surface loudly.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{CallRole, ChatProvider, ChatRequest, ProviderFailure, ProviderReply};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFailure {
    Transient,
    Auth,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Fail { fail: MockFailure },
}

impl MockReply {
    pub fn fail(kind: MockFailure) -> Self {
        MockReply::Fail { fail: kind }
    }
}

impl From<&str> for MockReply {
    fn from(text: &str) -> Self {
        MockReply::Text(text.to_string())
    }
}

impl From<String> for MockReply {
    fn from(text: String) -> Self {
        MockReply::Text(text)
    }
}

/// On-disk mock fixture (`--mock playlist.json`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub playlist: Vec<MockReply>,
    #[serde(default)]
    pub by_role: BTreeMap<CallRole, Vec<MockReply>>,
    /// Request content hash (see [`ChatRequest::content_hash`]) to reply.
    #[serde(default)]
    pub lookup: BTreeMap<String, MockReply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

impl MockScript {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let trimmed = text.trim_start();
        // A bare JSON array is shorthand for a playlist.
        if trimmed.starts_with('[') {
            let playlist: Vec<MockReply> = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            return Ok(MockScript {
                playlist,
                ..Default::default()
            });
        }
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

pub type MockStub = Arc<dyn Fn(&ChatRequest, usize) -> MockReply + Send + Sync>;

#[derive(Default)]
struct Queues {
    playlist: VecDeque<MockReply>,
    by_role: BTreeMap<CallRole, VecDeque<MockReply>>,
}

pub struct MockProvider {
    tag: String,
    queues: Mutex<Queues>,
    lookup: BTreeMap<String, MockReply>,
    fallback: Option<String>,
    stub: Option<MockStub>,
    calls: AtomicUsize,
    seen: Mutex<Vec<ChatRequest>>,
}

impl MockProvider {
    pub fn from_script(script: MockScript) -> Self {
        Self {
            tag: "mock".into(),
            queues: Mutex::new(Queues {
                playlist: script.playlist.into(),
                by_role: script
                    .by_role
                    .into_iter()
                    .map(|(role, replies)| (role, replies.into()))
                    .collect(),
            }),
            lookup: script.lookup,
            fallback: script.fallback,
            stub: None,
            calls: AtomicUsize::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn playlist<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::playlist_of(replies.into_iter().map(|s| MockReply::Text(s.into())).collect())
    }

    pub fn playlist_of(replies: Vec<MockReply>) -> Self {
        Self::from_script(MockScript {
            playlist: replies,
            ..Default::default()
        })
    }

    pub fn stub<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest, usize) -> MockReply + Send + Sync + 'static,
    {
        Self::from_script(MockScript::default()).with_stub(Arc::new(f))
    }

    /// Stub consulted once the scripted replies run out.
    pub fn with_stub(mut self, stub: MockStub) -> Self {
        self.stub = Some(stub);
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Every request received, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("mock poisoned").clone()
    }

    fn resolve(&self, request: &ChatRequest, index: usize) -> Option<MockReply> {
        if let Some(reply) = self.lookup.get(&request.content_hash()) {
            return Some(reply.clone());
        }
        {
            let mut queues = self.queues.lock().expect("mock poisoned");
            if let Some(reply) = queues
                .by_role
                .get_mut(&request.role)
                .and_then(VecDeque::pop_front)
            {
                return Some(reply);
            }
            if let Some(reply) = queues.playlist.pop_front() {
                return Some(reply);
            }
        }
        if let Some(stub) = &self.stub {
            return Some(stub(request, index));
        }
        self.fallback.clone().map(MockReply::Text)
    }
}

impl ChatProvider for MockProvider {
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn send(&self, request: &ChatRequest) -> Result<ProviderReply, ProviderFailure> {
        let index = self.calls.fetch_add(1, Ordering::SeqCst);
        self.seen.lock().expect("mock poisoned").push(request.clone());
        match self.resolve(request, index) {
            Some(MockReply::Text(text)) => Ok(ProviderReply::text(text)),
            Some(MockReply::Fail { fail }) => Err(match fail {
                MockFailure::Transient => ProviderFailure::Transient("mock: scripted 503".into()),
                MockFailure::Auth => ProviderFailure::Auth("mock: scripted 401".into()),
                MockFailure::Fatal => ProviderFailure::Fatal("mock: scripted failure".into()),
            }),
            None => Err(ProviderFailure::Fatal(format!(
                "mock exhausted at call {index} ({})",
                request.role.as_str()
            ))),
        }
    }
}
