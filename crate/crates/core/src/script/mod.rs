//! Drama-script data model, plot chains and the bounded-diff machinery.

mod chain;
mod model;
mod parse;

pub use chain::{
    apply_diff, diff_chains, enforce_reflection_bound, is_scene_complete, mark_complete,
    BoundViolation, CompletionChange, PlotChainDiff, PlotEdit, PlotInsertion, ReflectionBound,
    ReflectionVerdict,
};
pub use model::{
    CharacterProfile, DramaScript, Plot, PlotChain, PlotOrigin, Scene, SceneMode, SCRIPT_SCHEMA,
};
pub use parse::{parse_script, serialize_script, validate_generated, validate_script};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown plot `{0}`")]
    UnknownPlot(String),
    #[error("duplicate plot id `{0}` makes the diff ambiguous")]
    AmbiguousDiff(String),
    #[error("invalid diff: {0}")]
    InvalidDiff(String),
}
