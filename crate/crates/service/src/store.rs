//! On-disk layout: `scripts/*.json`, `sessions/*.jsonl` event logs with a
//! `*.meta.json` handle beside each, and `jobs/*.json` generation jobs.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stagecraft_core::bundled::{EXAMPLE_SCRIPT, EXAMPLE_SCRIPT_NAME};
use stagecraft_core::generation::{PipelineFailure, RunReport};
use stagecraft_core::runtime::ArchitectureConfig;
use stagecraft_core::script::{parse_script, serialize_script, DramaScript};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub script_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub architecture: ArchitectureConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub id: String,
    pub premise: String,
    pub seed: u64,
    pub state: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 96 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> std::io::Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}

impl Store {
    /// Creates the directory tree and seeds the bundled example script.
    pub fn open(root: &Path) -> std::io::Result<Self> {
        for sub in ["scripts", "sessions", "jobs", "reports"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        let store = Self {
            root: root.to_path_buf(),
        };
        let example = store.script_path(EXAMPLE_SCRIPT_NAME);
        if !example.exists() {
            std::fs::write(example, EXAMPLE_SCRIPT)?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn script_path(&self, id: &str) -> PathBuf {
        self.root.join("scripts").join(format!("{id}.json"))
    }

    pub fn session_log_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.jsonl"))
    }

    fn session_meta_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.meta.json"))
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{id}.json"))
    }

    fn report_path(&self, id: &str) -> PathBuf {
        self.root.join("reports").join(format!("{id}.json"))
    }

    pub fn put_script(&self, id: &str, script: &DramaScript) -> std::io::Result<()> {
        std::fs::write(self.script_path(id), serialize_script(script))
    }

    pub fn script(&self, id: &str) -> Result<DramaScript, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::UnknownScript(id.into()));
        }
        let text = std::fs::read_to_string(self.script_path(id)).map_err(|_| ApiError::UnknownScript(id.into()))?;
        parse_script(&text).map_err(|e| ApiError::Validation(format!("stored script `{id}` is invalid: {e}")))
    }

    pub fn script_ids(&self) -> std::io::Result<Vec<String>> {
        let mut ids: Vec<String> = std::fs::read_dir(self.root.join("scripts"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_string))
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn put_session_meta(&self, handle: &SessionHandle) -> std::io::Result<()> {
        write_json(&self.session_meta_path(&handle.id), handle)
    }

    pub fn session_meta(&self, id: &str) -> Option<SessionHandle> {
        if !valid_id(id) {
            return None;
        }
        read_json(&self.session_meta_path(id)).ok()
    }

    pub fn put_job(&self, job: &GenerationJob) -> std::io::Result<()> {
        write_json(&self.job_path(&job.id), job)
    }

    pub fn job(&self, id: &str) -> Option<GenerationJob> {
        if !valid_id(id) {
            return None;
        }
        read_json(&self.job_path(id)).ok()
    }

    pub fn put_report(&self, id: &str, report: &RunReport) -> std::io::Result<()> {
        write_json(&self.report_path(id), report)
    }

    pub fn put_failure(&self, id: &str, failure: &PipelineFailure) -> std::io::Result<()> {
        write_json(&self.report_path(id), &failure.report)
    }

    pub fn report(&self, id: &str) -> Option<serde_json::Value> {
        if !valid_id(id) {
            return None;
        }
        read_json(&self.report_path(id)).ok()
    }
}
