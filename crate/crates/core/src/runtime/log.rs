//! Append-only JSON-lines session log and replay.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ArchitectureConfig, Session, SessionError, TurnRecord};
use crate::script::DramaScript;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Started {
        script: DramaScript,
        config: ArchitectureConfig,
    },
    Turn {
        record: TurnRecord,
    },
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("reading session log: {0}")]
    Io(#[from] std::io::Error),
    #[error("session log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("session log does not start with a `started` event")]
    MissingStart,
    #[error("session log replays to a different chain at turn {turn}")]
    Diverged { turn: u64 },
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Single-writer log file. Every append is flushed and synced.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
}

impl SessionLog {
    pub fn create(path: &Path, script: &DramaScript, config: &ArchitectureConfig) -> std::io::Result<Self> {
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        let mut log = Self {
            path: path.to_path_buf(),
            file,
        };
        log.append(&SessionEvent::Started {
            script: script.clone(),
            config: *config,
        })?;
        Ok(log)
    }

    /// Opens an existing log for appending, cutting off a torn final line so
    /// the next event starts on a fresh line.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            tracing::warn!("truncating torn tail of {}", path.display());
            let file = OpenOptions::new().write(true).open(path)?;
            file.set_len(keep as u64)?;
            file.sync_data()?;
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &SessionEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.file.sync_data()
    }

    pub fn append_turn(&mut self, record: &TurnRecord) -> std::io::Result<()> {
        self.append(&SessionEvent::Turn {
            record: record.clone(),
        })
    }
}

/// Reads all events. A torn final line (crash mid-write) is dropped.
pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>, ReplayError> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut events = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(event) => events.push(event),
            Err(_) if Some(i) == last => {
                tracing::warn!("dropping torn final line {} of {}", i + 1, path.display());
            }
            Err(e) => {
                return Err(ReplayError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(events)
}

/// Rebuilds a session from its events without any provider calls.
pub fn replay(events: &[SessionEvent]) -> Result<Session, ReplayError> {
    let mut iter = events.iter();
    let mut session = match iter.next() {
        Some(SessionEvent::Started { script, config }) => Session::new(script.clone(), *config)?,
        _ => return Err(ReplayError::MissingStart),
    };
    for event in iter {
        match event {
            SessionEvent::Turn { record } => {
                let before_scene = session.scene_cursor;
                session.apply_record(record);
                let same_scene = session.scene_cursor == before_scene && !session.is_finished();
                if same_scene && session.chain != record.chain_after {
                    return Err(ReplayError::Diverged { turn: record.turn });
                }
            }
            SessionEvent::Started { .. } => return Err(ReplayError::MissingStart),
        }
    }
    Ok(session)
}
