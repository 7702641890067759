//! Role-agent architectures, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::script::{Scene, SceneMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureKind {
    DirectorActor,
    OneForAll,
    Hybrid,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 3] = [
        ArchitectureKind::DirectorActor,
        ArchitectureKind::OneForAll,
        ArchitectureKind::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchitectureKind::DirectorActor => "director-actor",
            ArchitectureKind::OneForAll => "one-for-all",
            ArchitectureKind::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown architecture `{0}` (expected director-actor, one-for-all or hybrid)")]
pub struct UnknownArchitecture(pub String);

impl FromStr for ArchitectureKind {
    type Err = UnknownArchitecture;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownArchitecture(s.to_string()))
    }
}

/// How one scene's turns are answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispatch {
    /// One global call decides and speaks.
    OneForAll,
    /// A director call then an actor call.
    DirectorActor,
}

impl Dispatch {
    pub fn calls_per_turn(self) -> u64 {
        match self {
            Dispatch::OneForAll => 1,
            Dispatch::DirectorActor => 2,
        }
    }
}

/// Chooses the dispatch for each scene.
pub trait Architecture: Send + Sync {
    fn kind(&self) -> ArchitectureKind;
    fn dispatch_for(&self, scene: &Scene) -> Dispatch;
}

pub struct DirectorActorArchitecture;
pub struct OneForAllArchitecture;
/// Narrative scenes run one-for-all, interactive scenes director-actor.
pub struct HybridArchitecture;

impl Architecture for DirectorActorArchitecture {
    fn kind(&self) -> ArchitectureKind {
        ArchitectureKind::DirectorActor
    }

    fn dispatch_for(&self, _scene: &Scene) -> Dispatch {
        Dispatch::DirectorActor
    }
}

impl Architecture for OneForAllArchitecture {
    fn kind(&self) -> ArchitectureKind {
        ArchitectureKind::OneForAll
    }

    fn dispatch_for(&self, _scene: &Scene) -> Dispatch {
        Dispatch::OneForAll
    }
}

impl Architecture for HybridArchitecture {
    fn kind(&self) -> ArchitectureKind {
        ArchitectureKind::Hybrid
    }

    fn dispatch_for(&self, scene: &Scene) -> Dispatch {
        mode_dispatch(scene.mode)
    }
}

pub fn mode_dispatch(mode: SceneMode) -> Dispatch {
    match mode {
        SceneMode::Narrative => Dispatch::OneForAll,
        SceneMode::Interactive => Dispatch::DirectorActor,
    }
}

/// Architectures by name.
pub struct ArchitectureRegistry {
    entries: BTreeMap<String, Arc<dyn Architecture>>,
}

impl Default for ArchitectureRegistry {
    fn default() -> Self {
        let mut registry = Self {
            entries: BTreeMap::new(),
        };
        registry.register(Arc::new(DirectorActorArchitecture));
        registry.register(Arc::new(OneForAllArchitecture));
        registry.register(Arc::new(HybridArchitecture));
        registry
    }
}

impl ArchitectureRegistry {
    pub fn register(&mut self, architecture: Arc<dyn Architecture>) {
        self.entries
            .insert(architecture.kind().as_str().to_string(), architecture);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Architecture>, UnknownArchitecture> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownArchitecture(name.to_string()))
    }

    pub fn resolve(&self, kind: ArchitectureKind) -> Arc<dyn Architecture> {
        self.get(kind.as_str()).expect("built-in architectures are registered")
    }
}

/// Realised turn count of one scene, with its mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneTurns {
    pub mode: SceneMode,
    pub turns: u64,
}

/// Closed-form inference count: per-turn dispatch cost plus one call per
/// reflection point, `floor(turns / k)` per scene.
pub fn inference_count(kind: ArchitectureKind, scenes: &[SceneTurns], k: Option<u32>) -> u64 {
    scenes
        .iter()
        .map(|s| {
            let per_turn = match kind {
                ArchitectureKind::DirectorActor => 2,
                ArchitectureKind::OneForAll => 1,
                ArchitectureKind::Hybrid => mode_dispatch(s.mode).calls_per_turn(),
            };
            let reflections = k.map_or(0, |k| s.turns / u64::from(k.max(1)));
            s.turns * per_turn + reflections
        })
        .sum()
}
