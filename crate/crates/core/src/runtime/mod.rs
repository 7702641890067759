//! Live drama sessions: plot-chain decisions, periodic bounded reflection,
//! architecture dispatch, memory and scene transitions.

mod architecture;
mod log;
pub mod prompts;
mod reflection;

pub use architecture::{
    inference_count, mode_dispatch, Architecture, ArchitectureKind, ArchitectureRegistry,
    DirectorActorArchitecture, Dispatch, HybridArchitecture, OneForAllArchitecture, SceneTurns,
    UnknownArchitecture,
};
pub use log::{read_events, replay, ReplayError, SessionEvent, SessionLog};
pub use reflection::{leakage_lint, parse_proposal, LeakageFlag, LeakageKind, ReflectionRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{
    check_strategy,
    parse_keyed, ChatRequest, GatewayError, InputClass,
    KeyedResponse, LlmGateway, MalformedDecision, Strategy,
};
use crate::script::{
    is_scene_complete, mark_complete, validate_script, DramaScript, PlotChain, ReflectionBound,
    ReflectionVerdict, Scene, ScriptError,
};

pub const ALL: &str = "all";
pub const DEFAULT_K: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    /// Strictly increasing across the session.
    pub seq: u64,
    /// Moment this entry belongs to; the player and the reply share one.
    pub turn: u64,
    pub scene_index: u32,
    pub speaker: String,
    pub addressee: String,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

/// Snapshot of the current scene as seen by an actor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub scene_index: u32,
    pub location: String,
    pub present_characters: Vec<String>,
    pub last_n_entries: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Motivation {
    pub target_actor: String,
    pub instruction: String,
    pub turn: u64,
    /// The director's reading of the player input, carried to the actor.
    pub input_class: InputClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub asserted_completions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub speaker: String,
    pub addressee: String,
    pub utterance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub asserted_completions: Vec<String>,
    pub input_class: InputClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    pub kind: ArchitectureKind,
    /// Reflection period; `None` disables reflection.
    #[serde(default = "default_k")]
    pub k: Option<u32>,
    #[serde(default = "default_budget")]
    pub reflection_budget: u32,
    /// Most recent memory entries shown in prompts; `None` shows all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_window: Option<usize>,
}

fn default_k() -> Option<u32> {
    Some(DEFAULT_K)
}

fn default_budget() -> u32 {
    1
}

impl ArchitectureConfig {
    pub fn new(kind: ArchitectureKind) -> Self {
        Self {
            kind,
            k: default_k(),
            reflection_budget: default_budget(),
            memory_window: None,
        }
    }

    pub fn with_k(mut self, k: Option<u32>) -> Self {
        self.k = k.filter(|k| *k > 0);
        self
    }

    pub fn with_budget(mut self, budget: u32) -> Self {
        self.reflection_budget = budget;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    /// The previous turn finished a scene; the next one starts fresh.
    SceneTransition,
    Finished,
}

/// Logical calls of one turn, by role. Repairs are counted apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnCalls {
    pub director: u64,
    pub actor: u64,
    pub global: u64,
    pub reflection: u64,
    pub repairs: u64,
}

impl TurnCalls {
    pub fn logical(&self) -> u64 {
        self.director + self.actor + self.global + self.reflection
    }

    fn add(&mut self, other: &TurnCalls) {
        self.director += other.director;
        self.actor += other.actor;
        self.global += other.global;
        self.reflection += other.reflection;
        self.repairs += other.repairs;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub turn: u64,
    pub scene_index: u32,
    pub calls: TurnCalls,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceLedger {
    pub entries: Vec<LedgerEntry>,
}

impl InferenceLedger {
    pub fn totals(&self) -> TurnCalls {
        let mut t = TurnCalls::default();
        for e in &self.entries {
            t.add(&e.calls);
        }
        t
    }

    pub fn logical_total(&self) -> u64 {
        self.totals().logical()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneHeader {
    pub index: u32,
    pub location: String,
    pub background: String,
    pub is_flashback: bool,
}

impl SceneHeader {
    pub fn of(scene: &Scene) -> Self {
        Self {
            index: scene.index,
            location: scene.location.clone(),
            background: scene.background.clone(),
            is_flashback: scene.is_flashback,
        }
    }
}

/// Everything needed to re-apply one committed turn without a provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u64,
    pub scene_index: u32,
    pub scene_moment: u32,
    pub input: String,
    pub dispatch: Dispatch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<ReflectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motivation: Option<Motivation>,
    pub decision: Decision,
    /// Completions actually applied, after dropping unknown or repeated ids.
    pub applied_completions: Vec<String>,
    pub calls: TurnCalls,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Chain after the turn, for audits and replay checks.
    pub chain_after: PlotChain,
}

/// What a caller sees after one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnResult {
    pub turn: u64,
    pub scene_index: u32,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motivation: Option<Motivation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<ReflectionRecord>,
    pub completed: Vec<String>,
    /// Set when this turn moved the session into a new scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_header: Option<SceneHeader>,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TurnError {
    #[error("session is finished")]
    Finished,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error(transparent)]
    Malformed(#[from] MalformedDecision),
}

impl TurnError {
    /// Failed turns never change state, so the same input can be re-sent.
    pub fn replayable(&self) -> bool {
        !matches!(self, TurnError::Finished)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Script(#[from] ScriptError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub script: DramaScript,
    pub config: ArchitectureConfig,
    /// 0-based index into `script.scenes`.
    pub scene_cursor: usize,
    /// Moments completed in the session.
    pub turn: u64,
    /// Moments completed in the current scene.
    pub scene_turn: u32,
    pub chain: PlotChain,
    pub memory: Vec<MemoryEntry>,
    pub ledger: InferenceLedger,
    pub status: SessionStatus,
    pub reflections: Vec<ReflectionRecord>,
    /// Realised turns per visited scene.
    pub scene_turns: Vec<SceneTurns>,
    next_seq: u64,
}

impl Session {
    pub fn new(script: DramaScript, config: ArchitectureConfig) -> Result<Self, SessionError> {
        validate_script(&script)?;
        let chain = script.scenes[0].plot_chain.clone();
        let mode = script.scenes[0].mode;
        Ok(Self {
            script,
            config,
            scene_cursor: 0,
            turn: 0,
            scene_turn: 0,
            chain,
            memory: Vec::new(),
            ledger: InferenceLedger::default(),
            status: SessionStatus::Active,
            reflections: Vec::new(),
            scene_turns: vec![SceneTurns { mode, turns: 0 }],
            next_seq: 1,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.script.scenes[self.scene_cursor.min(self.script.scenes.len() - 1)]
    }

    pub fn scene_header(&self) -> SceneHeader {
        SceneHeader::of(self.scene())
    }

    pub fn player_name(&self) -> String {
        self.script
            .player()
            .map(|p| p.name.clone())
            .unwrap_or_else(|| "player".into())
    }

    pub fn is_finished(&self) -> bool {
        self.status == SessionStatus::Finished
    }

    pub fn dispatch(&self) -> Dispatch {
        ArchitectureRegistry::default()
            .resolve(self.config.kind)
            .dispatch_for(self.scene())
    }

    pub fn reflection_due(&self) -> bool {
        self.config
            .k
            .is_some_and(|k| k > 0 && (self.scene_turn + 1) % k == 0)
    }

    pub fn memory_window(&self) -> &[MemoryEntry] {
        match self.config.memory_window {
            Some(n) if n < self.memory.len() => &self.memory[self.memory.len() - n..],
            _ => &self.memory,
        }
    }

    pub fn observe(&self) -> Observation {
        let scene = self.scene();
        let mut present: Vec<String> = scene
            .present_npcs(&self.script)
            .iter()
            .map(|c| c.name.clone())
            .collect();
        present.push(self.player_name());
        Observation {
            scene_index: scene.index,
            location: scene.location.clone(),
            present_characters: present,
            last_n_entries: self.config.memory_window,
        }
    }

    /// Closed-form prediction for the turns realised so far.
    pub fn predicted_inferences(&self) -> u64 {
        inference_count(self.config.kind, &self.scene_turns, self.config.k)
    }

    /// Canonical name of a present non-player character.
    fn present_npc(&self, name: &str) -> Option<String> {
        let name = name.trim();
        self.scene()
            .present_npcs(&self.script)
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .map(|c| c.name.clone())
    }

    /// Runs one moment: optional reflection, dispatch, memory, transition.
    /// On error the session is unchanged.
    pub fn step(&mut self, input: &str, gateway: &LlmGateway) -> Result<TurnResult, TurnError> {
        let record = self.plan_turn(input, gateway)?;
        Ok(self.apply_record(&record))
    }

    /// Computes a turn without committing it.
    pub fn plan_turn(&self, input: &str, gateway: &LlmGateway) -> Result<TurnRecord, TurnError> {
        if self.is_finished() {
            return Err(TurnError::Finished);
        }
        let mut scratch = self.clone();
        let mut notes = TurnNotes::default();

        let reflection = if scratch.reflection_due() {
            notes.calls.reflection += 1;
            let record = reflect(&scratch, input, gateway)?;
            if let Some(chain) = record.accepted_chain() {
                scratch.chain = chain.clone();
            }
            Some(record)
        } else {
            None
        };

        let before = scratch.chain.clone();
        let dispatch = scratch.dispatch();
        let (chain, motivation, decision) = match dispatch {
            Dispatch::OneForAll => {
                let (chain, decision) = decide_one_for_all(&scratch, input, gateway, &mut notes)?;
                (chain, None, decision)
            }
            Dispatch::DirectorActor => {
                let (chain, motivation) = direct(&scratch, input, gateway, &mut notes)?;
                scratch.chain = chain.clone();
                let decision = act(&scratch, input, &motivation, gateway, &mut notes)?;
                (chain, Some(motivation), decision)
            }
        };

        let applied = diff_completions(&before, &chain);
        Ok(TurnRecord {
            turn: self.turn + 1,
            scene_index: self.scene().index,
            scene_moment: self.scene_turn + 1,
            input: input.to_string(),
            dispatch,
            reflection,
            motivation,
            decision,
            applied_completions: applied,
            calls: notes.calls,
            warnings: notes.warnings,
            chain_after: chain,
        })
    }

    /// Commits a planned or logged turn. Replay uses the same path.
    pub fn apply_record(&mut self, record: &TurnRecord) -> TurnResult {
        if let Some(r) = &record.reflection {
            if let Some(chain) = r.accepted_chain() {
                self.chain = chain.clone();
            }
            self.reflections.push(r.clone());
        }
        for id in &record.applied_completions {
            if let Ok(chain) = mark_complete(&self.chain, id) {
                self.chain = chain;
            }
        }

        let turn = self.turn + 1;
        let scene_index = self.scene().index;
        let player = self.player_name();
        if !record.input.trim().is_empty() {
            self.push_memory(turn, scene_index, &player, ALL, record.input.trim(), None);
        }
        let d = &record.decision;
        self.push_memory(turn, scene_index, &d.speaker, &d.addressee, &d.utterance, d.action.clone());

        self.ledger.entries.push(LedgerEntry {
            turn,
            scene_index,
            calls: record.calls,
        });
        self.turn = turn;
        self.scene_turn += 1;
        if let Some(s) = self.scene_turns.last_mut() {
            s.turns += 1;
        }

        let mut scene_header = None;
        if is_scene_complete(&self.chain) {
            if self.scene_cursor + 1 >= self.script.scenes.len() {
                self.status = SessionStatus::Finished;
            } else {
                self.scene_cursor += 1;
                self.scene_turn = 0;
                self.chain = self.scene().plot_chain.clone();
                self.scene_turns.push(SceneTurns {
                    mode: self.scene().mode,
                    turns: 0,
                });
                self.status = SessionStatus::SceneTransition;
                scene_header = Some(self.scene_header());
            }
        } else {
            self.status = SessionStatus::Active;
        }

        TurnResult {
            turn,
            scene_index,
            decision: record.decision.clone(),
            motivation: record.motivation.clone(),
            reflection: record.reflection.clone(),
            completed: record.applied_completions.clone(),
            scene_header,
            status: self.status,
            warnings: record.warnings.clone(),
        }
    }

    fn push_memory(
        &mut self,
        turn: u64,
        scene_index: u32,
        speaker: &str,
        addressee: &str,
        utterance: &str,
        action: Option<String>,
    ) {
        self.memory.push(MemoryEntry {
            seq: self.next_seq,
            turn,
            scene_index,
            speaker: speaker.to_string(),
            addressee: addressee.to_string(),
            utterance: utterance.to_string(),
            action,
        });
        self.next_seq += 1;
    }
}

fn diff_completions(before: &PlotChain, after: &PlotChain) -> Vec<String> {
    after
        .iter()
        .filter(|p| p.completed && before.get(&p.id).is_some_and(|b| !b.completed))
        .map(|p| p.id.clone())
        .collect()
}

/// Per-turn call counts and warnings gathered while planning.
#[derive(Debug, Clone, Default)]
pub struct TurnNotes {
    pub calls: TurnCalls,
    pub warnings: Vec<String>,
}

/// Applies asserted completions, dropping unknown and already-complete ids.
pub fn apply_assertions(chain: &PlotChain, ids: &[String], warnings: &mut Vec<String>) -> PlotChain {
    let mut chain = chain.clone();
    for id in ids {
        match chain.get(id) {
            None => warnings.push(format!("dropped completion of unknown plot `{id}`")),
            Some(p) if p.completed => {}
            Some(_) => chain = mark_complete(&chain, id).expect("plot exists"),
        }
    }
    chain
}

/// Sends a runtime request, re-asking once when `parse` rejects the reply.
fn complete_parsed<T>(
    gateway: &LlmGateway,
    request: ChatRequest,
    notes: &mut TurnNotes,
    mut parse: impl FnMut(&str) -> Result<T, MalformedDecision>,
) -> Result<T, TurnError> {
    let reply = gateway.complete(&request)?;
    match parse(&reply.text) {
        Ok(value) => Ok(value),
        Err(first) => {
            notes.calls.repairs += 1;
            notes.warnings.push(format!("{}: {first}; asked again", request.role.as_str()));
            let retry = crate::generation::follow_up(&request, reply.text, prompts::repair(&first.0));
            let reply = gateway.complete(&retry)?;
            Ok(parse(&reply.text)?)
        }
    }
}

/// Class and strategy of a response; silent input is always Breaking.
fn class_and_strategy(
    keyed: &KeyedResponse,
    input: &str,
) -> Result<(InputClass, Option<Strategy>, Option<String>), MalformedDecision> {
    let class = keyed.class()?;
    let strategy = keyed.strategy()?;
    if input.trim().is_empty() {
        return Ok(match strategy {
            Some(s) => (InputClass::Breaking, Some(s), None),
            None => (
                InputClass::Breaking,
                Some(Strategy::Avoid),
                Some("silent input without a strategy; using Avoid".into()),
            ),
        });
    }
    let class = class.ok_or_else(|| MalformedDecision("missing CLASS line".into()))?;
    check_strategy(Some(class), strategy)?;
    Ok((class, strategy, None))
}

/// One global call: completions, classification and the reply together.
pub fn decide_one_for_all(
    session: &Session,
    input: &str,
    gateway: &LlmGateway,
    notes: &mut TurnNotes,
) -> Result<(PlotChain, Decision), TurnError> {
    notes.calls.global += 1;
    let request = prompts::global(session, input);
    let (decision, extra) = complete_parsed(gateway, request, notes, |text| {
        let keyed = parse_keyed(text)?;
        if keyed.get("COMPLETED").is_none() {
            return Err(MalformedDecision("missing COMPLETED line".into()));
        }
        let speaker = keyed.require("SPEAKER")?;
        let speaker = session
            .present_npc(speaker)
            .ok_or_else(|| MalformedDecision(format!("SPEAKER `{speaker}` is not a character in this scene")))?;
        let (input_class, strategy, warning) = class_and_strategy(&keyed, input)?;
        Ok((
            Decision {
                speaker,
                addressee: keyed.require("TO")?.to_string(),
                utterance: keyed.require("SAY")?.to_string(),
                action: keyed.optional("ACTION").map(str::to_string),
                asserted_completions: keyed.completed()?,
                input_class,
                strategy,
            },
            warning,
        ))
    })?;
    notes.warnings.extend(extra);
    let chain = apply_assertions(&session.chain, &decision.asserted_completions, &mut notes.warnings);
    Ok((chain, decision))
}

/// Director call: completions first, then a motivation for one present actor.
pub fn direct(
    session: &Session,
    input: &str,
    gateway: &LlmGateway,
    notes: &mut TurnNotes,
) -> Result<(PlotChain, Motivation), TurnError> {
    notes.calls.director += 1;
    let request = prompts::director(session, input);
    let turn = session.turn + 1;
    let (motivation, extra) = complete_parsed(gateway, request, notes, |text| {
        let keyed = parse_keyed(text)?;
        if keyed.get("COMPLETED").is_none() {
            return Err(MalformedDecision("missing COMPLETED line".into()));
        }
        let target = keyed.require("SPEAKER")?;
        let target = session
            .present_npc(target)
            .ok_or_else(|| MalformedDecision(format!("SPEAKER `{target}` is not a character in this scene")))?;
        let (input_class, strategy, warning) = class_and_strategy(&keyed, input)?;
        Ok((
            Motivation {
                target_actor: target,
                instruction: keyed.require("MOTIVATION")?.to_string(),
                turn,
                input_class,
                strategy,
                asserted_completions: keyed.completed()?,
            },
            warning,
        ))
    })?;
    notes.warnings.extend(extra);
    let chain = apply_assertions(&session.chain, &motivation.asserted_completions, &mut notes.warnings);
    Ok((chain, motivation))
}

/// Every plot description the actor must not see.
fn hidden_texts(session: &Session) -> Vec<&str> {
    session
        .script
        .all_plot_descriptions()
        .chain(session.chain.iter().map(|p| p.description.as_str()))
        .collect()
}

/// Actor call. The prompt carries the profile, the motivation, memory and
/// the observation; plot descriptions are redacted if they leak in.
pub fn act(
    session: &Session,
    input: &str,
    motivation: &Motivation,
    gateway: &LlmGateway,
    notes: &mut TurnNotes,
) -> Result<Decision, TurnError> {
    let profile = session
        .script
        .character(&motivation.target_actor)
        .filter(|c| !c.is_player && session.scene().is_present(&c.name))
        .ok_or_else(|| TurnError::Precondition(format!("`{}` is not present", motivation.target_actor)))?;
    let setup = session.scene().setups.get(&profile.name).map(String::as_str).unwrap_or("");
    let mut request = prompts::actor(
        profile,
        setup,
        motivation,
        &session.observe(),
        session.memory_window(),
        &session.player_name(),
        input,
    );
    let hidden = hidden_texts(session);
    let mut redactions = 0;
    for message in &mut request.messages {
        let (clean, hits) = prompts::redact(&message.content, &hidden);
        message.content = clean;
        redactions += hits;
    }
    if redactions > 0 {
        notes
            .warnings
            .push(format!("redacted {redactions} plot description(s) from the actor prompt"));
    }

    notes.calls.actor += 1;
    let target = motivation.target_actor.clone();
    complete_parsed(gateway, request, notes, |text| {
        let keyed = parse_keyed(text)?;
        Ok(Decision {
            speaker: target.clone(),
            addressee: keyed.require("TO")?.to_string(),
            utterance: keyed.require("SAY")?.to_string(),
            action: keyed.optional("ACTION").map(str::to_string),
            asserted_completions: motivation.asserted_completions.clone(),
            input_class: motivation.input_class,
            strategy: motivation.strategy,
        })
    })
}

/// One reflection call proposing a new chain, checked against the bound.
/// Provider and parse failures are recorded and leave the chain as is.
pub fn reflect(session: &Session, input: &str, gateway: &LlmGateway) -> Result<ReflectionRecord, TurnError> {
    if !session.reflection_due() {
        return Err(TurnError::Precondition(format!(
            "scene moment {} is not a reflection point",
            session.scene_turn + 1
        )));
    }
    let mut record = ReflectionRecord {
        scene_index: session.scene().index,
        scene_moment: session.scene_turn + 1,
        proposal: None,
        verdict: None,
        error: None,
        lint: Vec::new(),
    };
    let budget = session.config.reflection_budget;
    let reply = match gateway.complete(&prompts::reflection(session, input, budget)) {
        Ok(reply) => reply,
        Err(e) => {
            tracing::warn!("reflection skipped: {e}");
            record.error = Some(e.to_string());
            return Ok(record);
        }
    };
    let proposal = match parse_proposal(&reply.text, &session.chain) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return Ok(record);
        }
    };
    let verdict = ReflectionBound::new(budget).check(&session.chain, &proposal);
    if let ReflectionVerdict::Accepted { diff, .. } = &verdict {
        let mut conversation: Vec<&str> = session.memory.iter().map(|m| m.utterance.as_str()).collect();
        conversation.push(input);
        record.lint = leakage_lint(&session.script, session.scene_cursor, diff, &conversation);
    }
    record.proposal = Some(proposal);
    record.verdict = Some(verdict);
    Ok(record)
}

/// Stand-alone input classification: one classifier call, or none for
/// silent input.
pub fn classify_input(session: &Session, input: &str, gateway: &LlmGateway) -> Result<InputClass, TurnError> {
    if session.is_finished() {
        return Err(TurnError::Finished);
    }
    if input.trim().is_empty() {
        return Ok(InputClass::Breaking);
    }
    let reply = gateway.complete(&prompts::classifier(session, input))?;
    let keyed = parse_keyed(&reply.text)?;
    keyed
        .class()?
        .ok_or_else(|| TurnError::Malformed(MalformedDecision("missing CLASS line".into())))
}
