//! Core engine for interactive dramas: script model, narrative playbook,
//! LLM gateway, story generation, plot-chain runtime and simulated players.

pub mod autopilot;
pub mod bundled;
pub mod generation;
pub mod llm;
pub mod playbook;
pub mod runtime;
pub mod script;
pub mod simulation;
