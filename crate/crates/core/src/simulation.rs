//! Automated playthroughs driven by scripted player personas.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{CallRole, ChatRequest, LlmGateway};
use crate::runtime::prompts::render_memory;
use crate::runtime::{
    ArchitectureConfig, ArchitectureKind, LeakageFlag, Session, SessionError, TurnCalls, TurnError, TurnRecord,
};
use crate::script::DramaScript;

pub const BUNDLED_PERSONAS: &str = include_str!("../data/personas/personas.json");
pub const DEFAULT_MAX_TURNS: u32 = 60;
const PLAYER_MEMORY: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerPersona {
    pub id: String,
    pub name: String,
    pub description: String,
}

#[derive(Deserialize)]
struct PersonaFile {
    personas: Vec<PlayerPersona>,
}

pub fn personas() -> &'static [PlayerPersona] {
    static PERSONAS: OnceLock<Vec<PlayerPersona>> = OnceLock::new();
    PERSONAS.get_or_init(|| {
        serde_json::from_str::<PersonaFile>(BUNDLED_PERSONAS)
            .expect("bundled personas parse")
            .personas
    })
}

/// Looks a persona up by id, name or an unambiguous id prefix.
pub fn persona(key: &str) -> Option<&'static PlayerPersona> {
    let key = key.trim().to_lowercase().replace([' ', '_'], "-");
    let all = personas();
    if let Some(p) = all.iter().find(|p| p.id == key || p.name.to_lowercase().replace(' ', "-") == key) {
        return Some(p);
    }
    let mut prefixed = all.iter().filter(|p| p.id.starts_with(&key));
    match (prefixed.next(), prefixed.next()) {
        (Some(p), None) => Some(p),
        _ => None,
    }
}

pub fn player_request(session: &Session, persona: &PlayerPersona, turn: u64) -> ChatRequest {
    let scene = session.scene();
    let player = session.player_name();
    let player_desc = session.script.player().map(|p| p.description.as_str()).unwrap_or("");
    let cast = scene
        .present_npcs(&session.script)
        .iter()
        .map(|c| format!("- {}: {}", c.name, c.description))
        .collect::<Vec<_>>()
        .join("\n");
    let recent = &session.memory[session.memory.len().saturating_sub(PLAYER_MEMORY)..];
    let user = format!(
        "## Persona\n{name}: {description}\n\n\
         ## Your Character\n{player}: {player_desc}\n\n\
         ## Scene\nScene {index} at {location}. {background}\n\n\
         ## Characters Present\n{cast}\n\n\
         ## Recent Conversation\n{memory}\n\n\
         ## Turn\nTurn: {turn}\n\n\
         ## Output Format\nSAY: what you say or do next, in one or two sentences\n",
        name = persona.name,
        description = persona.description,
        index = scene.index,
        location = scene.location,
        background = scene.background,
        memory = render_memory(recent),
    );
    ChatRequest::prompt(
        CallRole::Player,
        format!("You are a player in a text-based interactive drama, playing {player}."),
        user,
    )
}

/// The `SAY:` line of a player reply, or the whole reply.
pub fn player_utterance(reply: &str) -> String {
    reply
        .lines()
        .find_map(|l| {
            let l = l.trim();
            l.get(..4)
                .filter(|p| p.eq_ignore_ascii_case("say:"))
                .map(|_| l[4..].trim().to_string())
        })
        .unwrap_or_else(|| reply.trim().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneProgress {
    pub index: u32,
    pub plots: usize,
    pub completed: usize,
    pub turns: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub persona: String,
    pub architecture: ArchitectureConfig,
    pub max_turns: u32,
    pub finished: bool,
    pub turns: u64,
    pub scenes: Vec<SceneProgress>,
    pub plots_total: usize,
    pub plots_completed: usize,
    pub ledger: TurnCalls,
    pub ledger_total: u64,
    pub predicted_total: u64,
    pub player_calls: u64,
    /// Input class to strategy (or `none`) to count.
    pub strategies: BTreeMap<String, BTreeMap<String, u64>>,
    pub reflections_accepted: usize,
    pub reflections_adapted: usize,
    pub reflections_rejected: usize,
    pub reflection_errors: usize,
    pub lint: Vec<LeakageFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SimReport {
    pub fn completion_rate(&self) -> f64 {
        if self.plots_total == 0 {
            return 1.0;
        }
        self.plots_completed as f64 / self.plots_total as f64
    }

    pub fn ledger_matches(&self) -> bool {
        self.ledger_total == self.predicted_total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playthrough {
    pub report: SimReport,
    pub transcript: Vec<TurnRecord>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("playthrough aborted at turn {turn}: {message}")]
    Aborted {
        turn: u64,
        message: String,
        provider: bool,
        partial: Box<Playthrough>,
    },
}

impl SimError {
    pub fn is_provider_failure(&self) -> bool {
        matches!(self, SimError::Aborted { provider: true, .. })
    }
}

fn report(session: &Session, persona: &PlayerPersona, max_turns: u32, transcript: &[TurnRecord], player_calls: u64) -> SimReport {
    let mut scenes: Vec<SceneProgress> = Vec::new();
    for record in transcript {
        let progress = SceneProgress {
            index: record.scene_index,
            plots: record.chain_after.len(),
            completed: record.chain_after.completed_ids().count(),
            turns: record.scene_moment,
        };
        match scenes.last_mut() {
            Some(last) if last.index == record.scene_index => *last = progress,
            _ => scenes.push(progress),
        }
    }
    let visited: Vec<u32> = scenes.iter().map(|s| s.index).collect();
    for scene in &session.script.scenes {
        if !visited.contains(&scene.index) {
            scenes.push(SceneProgress {
                index: scene.index,
                plots: scene.plot_chain.len(),
                completed: 0,
                turns: 0,
            });
        }
    }

    let mut strategies: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for record in transcript {
        let strategy = record.decision.strategy.map_or("none".to_string(), |s| s.to_string());
        *strategies
            .entry(record.decision.input_class.to_string())
            .or_default()
            .entry(strategy)
            .or_default() += 1;
    }

    SimReport {
        persona: persona.id.clone(),
        architecture: session.config,
        max_turns,
        finished: session.is_finished(),
        turns: session.turn,
        plots_total: scenes.iter().map(|s| s.plots).sum(),
        plots_completed: scenes.iter().map(|s| s.completed).sum(),
        scenes,
        ledger: session.ledger.totals(),
        ledger_total: session.ledger.logical_total(),
        predicted_total: session.predicted_inferences(),
        player_calls,
        strategies,
        reflections_accepted: session.reflections.iter().filter(|r| r.is_accepted()).count(),
        reflections_adapted: session.reflections.iter().filter(|r| r.is_adaptation()).count(),
        reflections_rejected: session.reflections.iter().filter(|r| r.is_rejected()).count(),
        reflection_errors: session.reflections.iter().filter(|r| r.error.is_some()).count(),
        lint: session.reflections.iter().flat_map(|r| r.lint.iter().cloned()).collect(),
        error: None,
    }
}

/// Alternates player generation and runtime steps until the drama ends or
/// `max_turns` is reached.
pub fn run_playthrough(
    script: &DramaScript,
    persona: &PlayerPersona,
    config: ArchitectureConfig,
    max_turns: u32,
    drama: &LlmGateway,
    player: &LlmGateway,
) -> Result<Playthrough, SimError> {
    if max_turns == 0 {
        return Err(SimError::Precondition("max_turns must be greater than zero".into()));
    }
    let mut session = Session::new(script.clone(), config)?;
    let mut transcript = Vec::new();
    let mut player_calls = 0u64;

    let abort = |session: &Session, transcript: Vec<TurnRecord>, calls: u64, message: String, provider: bool| {
        let mut report = report(session, persona, max_turns, &transcript, calls);
        report.error = Some(message.clone());
        SimError::Aborted {
            turn: session.turn + 1,
            message,
            provider,
            partial: Box::new(Playthrough { report, transcript }),
        }
    };

    while !session.is_finished() && session.turn < u64::from(max_turns) {
        let request = player_request(&session, persona, session.turn + 1);
        player_calls += 1;
        let input = match player.complete(&request) {
            Ok(c) => player_utterance(&c.text),
            Err(e) => return Err(abort(&session, transcript, player_calls, format!("player: {e}"), true)),
        };
        let record = match session.plan_turn(&input, drama) {
            Ok(record) => record,
            Err(e) => {
                let provider = matches!(e, TurnError::Provider(_));
                return Err(abort(&session, transcript, player_calls, e.to_string(), provider));
            }
        };
        session.apply_record(&record);
        transcript.push(record);
    }

    let report = report(&session, persona, max_turns, &transcript, player_calls);
    Ok(Playthrough { report, transcript })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub architecture: ArchitectureConfig,
    pub playthroughs: usize,
    pub turns: u64,
    pub inferences: u64,
    pub predicted: u64,
    pub reflection_calls: u64,
    pub completion_rate: f64,
    /// Baseline inference count divided by this row's.
    pub speedup: f64,
}

/// The three compared configurations, baseline first.
pub fn comparison_configs() -> Vec<(&'static str, ArchitectureConfig)> {
    vec![
        ("director-actor", ArchitectureConfig::new(ArchitectureKind::DirectorActor)),
        ("hybrid", ArchitectureConfig::new(ArchitectureKind::Hybrid)),
        ("hybrid-no-reflection", ArchitectureConfig::new(ArchitectureKind::Hybrid).with_k(None)),
    ]
}

/// Runs every persona under each configuration. `gateways` must build fresh,
/// identically seeded drama and player gateways on every call.
pub fn compare_architectures(
    script: &DramaScript,
    personas: &[&PlayerPersona],
    max_turns: u32,
    gateways: &dyn Fn() -> (LlmGateway, LlmGateway),
) -> Result<Vec<ComparisonRow>, SimError> {
    if personas.is_empty() {
        return Err(SimError::Precondition("at least one persona is required".into()));
    }
    let mut rows: Vec<ComparisonRow> = Vec::new();
    for (label, config) in comparison_configs() {
        let mut row = ComparisonRow {
            label: label.to_string(),
            architecture: config,
            playthroughs: 0,
            turns: 0,
            inferences: 0,
            predicted: 0,
            reflection_calls: 0,
            completion_rate: 0.0,
            speedup: 1.0,
        };
        let (mut done, mut total) = (0usize, 0usize);
        for persona in personas {
            let (drama, player) = gateways();
            let run = run_playthrough(script, persona, config, max_turns, &drama, &player)?;
            row.playthroughs += 1;
            row.turns += run.report.turns;
            row.inferences += run.report.ledger_total;
            row.predicted += run.report.predicted_total;
            row.reflection_calls += run.report.ledger.reflection;
            done += run.report.plots_completed;
            total += run.report.plots_total;
        }
        row.completion_rate = if total == 0 { 1.0 } else { done as f64 / total as f64 };
        rows.push(row);
    }
    let baseline = rows[0].inferences as f64;
    for row in &mut rows {
        row.speedup = if row.inferences == 0 { 0.0 } else { baseline / row.inferences as f64 };
    }
    Ok(rows)
}
