//! Prompt builders for live sessions. Output grammars are documented in
//! `docs/decision-grammar.md`.

use crate::llm::{CallRole, ChatRequest};
use crate::script::{CharacterProfile, PlotChain};

use super::{MemoryEntry, Motivation, Observation, Session};

pub const SILENCE: &str = "(the player says nothing)";
pub const REDACTED: &str = "[…]";

const CLASS_RULES: &str = "\
Classify the player input first:\n\
- InPlot: it follows the current plot.\n\
- Daily: everyday small talk unrelated to the plot.\n\
- Breaking: it breaks the world, the character or the story logic.\n\
For Daily or Breaking input pick exactly one strategy:\n\
- Avoid: steer the conversation back to the plot.\n\
- Ignore-Question: skip the question and move the story forward with a new question or action.\n\
- Associate: connect something in the input to an element of the plot.\n\
InPlot input takes no strategy.";

pub fn render_chain(chain: &PlotChain) -> String {
    chain
        .iter()
        .map(|p| format!("[{}] {}: {}", if p.completed { "x" } else { " " }, p.id, p.description))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_memory(entries: &[MemoryEntry]) -> String {
    if entries.is_empty() {
        return "(nothing yet)".into();
    }
    entries
        .iter()
        .map(|m| {
            let action = m.action.as_deref().map(|a| format!(" *{a}*")).unwrap_or_default();
            format!("(t{}) {} -> {}:{action} {}", m.turn, m.speaker, m.addressee, m.utterance)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_input(player: &str, input: &str) -> String {
    if input.trim().is_empty() {
        format!("{player}: {SILENCE}")
    } else {
        format!("{player}: {}", input.trim())
    }
}

fn render_cast(session: &Session) -> String {
    let scene = session.scene();
    scene
        .present_npcs(&session.script)
        .iter()
        .map(|c| {
            let setup = scene.setups.get(&c.name).map(String::as_str).unwrap_or("");
            format!("- {}: {} Scene setup: {}", c.name, c.description, setup)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn stage_sections(session: &Session, input: &str) -> String {
    let scene = session.scene();
    let player = session.player_name();
    let player_desc = session.script.player().map(|p| p.description.as_str()).unwrap_or("");
    format!(
        "## Drama\n{title}: {background}\n\n\
         ## Scene\nScene {index} at {location}. {scene_bg}\n\n\
         ## Characters Present\n{cast}\n\n\
         ## Player\n{player}: {player_desc}\n\n\
         ## Plot Chain\n{chain}\n\n\
         ## Memory\n{memory}\n\n\
         ## Moment\nScene moment: {moment}\n\n\
         ## Player Input\n{input}\n\n",
        title = session.script.title,
        background = session.script.background,
        index = scene.index,
        location = scene.location,
        scene_bg = scene.background,
        cast = render_cast(session),
        chain = render_chain(&session.chain),
        memory = render_memory(session.memory_window()),
        moment = session.scene_turn + 1,
        input = render_input(&player, input),
    )
}

pub fn director(session: &Session, input: &str) -> ChatRequest {
    let user = format!(
        "{stage}## Rules\n\
         You are the director. Update the plot chain, then choose which present character answers \
         the player and tell that actor what to do. Mark a plot completed only when the conversation \
         has achieved it. Actors never see the plot chain, so the motivation must be self-contained.\n\
         {CLASS_RULES}\n\n\
         ## Output Format\n\
         COMPLETED: [ids of plots completed now, or none]\n\
         CLASS: InPlot | Daily | Breaking\n\
         STRATEGY: Avoid | Ignore-Question | Associate (omit for InPlot)\n\
         SPEAKER: name of the responding character\n\
         MOTIVATION: what the character should say or do next\n",
        stage = stage_sections(session, input)
    );
    ChatRequest::prompt(
        CallRole::Director,
        "You direct an interactive drama in which a human plays one of the characters.",
        user,
    )
}

pub fn global(session: &Session, input: &str) -> ChatRequest {
    let user = format!(
        "{stage}## Rules\n\
         You play every character except the player. Update the plot chain, then answer as the most \
         fitting present character. Mark a plot completed only when the conversation has achieved it.\n\
         {CLASS_RULES}\n\n\
         ## Output Format\n\
         COMPLETED: [ids of plots completed now, or none]\n\
         CLASS: InPlot | Daily | Breaking\n\
         STRATEGY: Avoid | Ignore-Question | Associate (omit for InPlot)\n\
         SPEAKER: name of the responding character\n\
         TO: who is addressed, or all\n\
         ACTION: optional stage action\n\
         SAY: the line spoken\n",
        stage = stage_sections(session, input)
    );
    ChatRequest::prompt(
        CallRole::Global,
        "You run every character of an interactive drama in which a human plays one of the characters.",
        user,
    )
}

/// Actor prompt: profile, motivation, memory and observation only.
pub fn actor(
    profile: &CharacterProfile,
    setup: &str,
    motivation: &Motivation,
    observation: &Observation,
    memory: &[MemoryEntry],
    player: &str,
    input: &str,
) -> ChatRequest {
    let user = format!(
        "## You Are\n{name}: {description}\n{setup}\n\n\
         ## Where You Are\n{location}, with {present}.\n\n\
         ## What Has Been Said\n{memory}\n\n\
         ## Player Input\n{input}\n\n\
         ## Direction\n{instruction}{strategy}\n\n\
         ## Output Format\n\
         TO: who you address, or all\n\
         ACTION: optional stage action\n\
         SAY: your line, in character\n",
        name = profile.name,
        description = profile.description,
        location = observation.location,
        present = observation.present_characters.join(", "),
        memory = render_memory(memory),
        input = render_input(player, input),
        instruction = motivation.instruction,
        strategy = motivation
            .strategy
            .map(|s| format!("\nReply strategy: {s}"))
            .unwrap_or_default(),
    );
    ChatRequest::prompt(
        CallRole::Actor,
        format!("You are {}, a character in an interactive drama. Stay in character.", profile.name),
        user,
    )
}

pub fn reflection(session: &Session, input: &str, budget: u32) -> ChatRequest {
    let player = session.player_name();
    let related: Vec<MemoryEntry> = session
        .memory
        .iter()
        .filter(|m| m.speaker == player || m.addressee == player)
        .cloned()
        .collect();
    let user = format!(
        "## Scene\nScene {index} at {location}. {background}\n\n\
         ## Plot Chain\n{chain}\n\n\
         ## Player Memories\n{memory}\n\n\
         ## Moment\nScene moment: {moment}\n\n\
         ## Player Input\n{input}\n\n\
         ## Rules\n\
         Adapt the remaining plots to what the player has shown interest in. You may rewrite at most \
         {budget} incomplete plot(s) or insert at most {budget} new plot(s) in total. Keep every id, \
         keep the order, leave completed plots untouched and never delete a plot. Tag a new plot `+`. \
         Return the chain unchanged when no adaptation is needed.\n\n\
         ## Output Format\n\
         PLOTS:\n[x] id: description\n[ ] id: description\n[ ] +: description of a new plot\n",
        index = session.scene().index,
        location = session.scene().location,
        background = session.scene().background,
        chain = render_chain(&session.chain),
        memory = render_memory(&related),
        moment = session.scene_turn + 1,
        input = render_input(&player, input),
    );
    ChatRequest::prompt(
        CallRole::Reflection,
        "You maintain the plot chain of an interactive drama.",
        user,
    )
}

pub fn classifier(session: &Session, input: &str) -> ChatRequest {
    let user = format!(
        "## Plot Chain\n{chain}\n\n\
         ## Player Input\n{input}\n\n\
         ## Rules\n{CLASS_RULES}\n\n\
         ## Output Format\nCLASS: InPlot | Daily | Breaking\n",
        chain = render_chain(&session.chain),
        input = render_input(&session.player_name(), input),
    );
    ChatRequest::prompt(
        CallRole::Classifier,
        "You classify player input in an interactive drama.",
        user,
    )
}

pub fn repair(problem: &str) -> String {
    format!(
        "Your reply could not be used: {problem}\n\
         Answer again with only the `KEY: value` lines from the output format."
    )
}

/// Replaces every occurrence of each secret with a placeholder.
pub fn redact(text: &str, secrets: &[&str]) -> (String, usize) {
    let mut out = text.to_string();
    let mut hits = 0;
    let mut sorted: Vec<&str> = secrets.iter().copied().filter(|s| !s.trim().is_empty()).collect();
    sorted.sort_by_key(|s| std::cmp::Reverse(s.len()));
    for secret in sorted {
        let n = out.matches(secret).count();
        if n > 0 {
            hits += n;
            out = out.replace(secret, REDACTED);
        }
    }
    (out, hits)
}
