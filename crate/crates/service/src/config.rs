use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stagecraft_core::generation::GenerationConfig;
use stagecraft_core::llm::ProviderConfig;
use stagecraft_core::runtime::{ArchitectureConfig, ArchitectureKind, DEFAULT_K};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Defaults applied to sessions that do not override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeSettings {
    pub architecture: ArchitectureKind,
    /// Reflection interval; 0 disables reflection.
    pub k: u32,
    pub reflection_budget: u32,
    pub memory_window: Option<usize>,
}

impl Default for RuntimeSettings {
    fn default() -> Self {
        Self {
            architecture: ArchitectureKind::Hybrid,
            k: DEFAULT_K,
            reflection_budget: 1,
            memory_window: None,
        }
    }
}

impl RuntimeSettings {
    pub fn architecture_config(&self, kind: Option<ArchitectureKind>, k: Option<u32>) -> ArchitectureConfig {
        let k = k.unwrap_or(self.k);
        let mut config = ArchitectureConfig::new(kind.unwrap_or(self.architecture))
            .with_k((k > 0).then_some(k))
            .with_budget(self.reflection_budget);
        config.memory_window = self.memory_window;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
    pub provider: ProviderConfig,
    pub runtime: RuntimeSettings,
    pub generation: GenerationConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("stagecraft-data"),
            bearer_token: None,
            provider: ProviderConfig::mock(stagecraft_core::llm::AUTOPILOT),
            runtime: RuntimeSettings::default(),
            generation: GenerationConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, ServiceConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServiceConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| ServiceConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stagecraft_core::llm::ProviderKind;

    #[test]
    fn parses_partial_file() {
        let config = ServiceConfig::from_toml(
            "data_dir = \"/tmp/x\"\n\n[runtime]\narchitecture = \"director-actor\"\nk = 0\n\n\
             [provider]\nkind = \"http_openai_compatible\"\nendpoint = \"http://localhost:9/v1\"\n",
        )
        .unwrap();
        assert_eq!(config.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(config.provider.kind, ProviderKind::HttpOpenAiCompatible);
        let arch = config.runtime.architecture_config(None, None);
        assert_eq!(arch.kind, ArchitectureKind::DirectorActor);
        assert_eq!(arch.k, None);
        assert_eq!(config.bind, "127.0.0.1:8080");
    }

    #[test]
    fn invalid_architecture_fails() {
        assert!(ServiceConfig::from_toml("[runtime]\narchitecture = \"teamwork\"\n").is_err());
    }
}
