//! Playwriting-guided story generation and the story-to-script transform.

pub mod prompts;
mod story;
mod transform;

pub use story::{apply_refinement, split_sentences, RefinementViolation, Sentence, Story};
pub use transform::{story_has_flashback, story_to_script, traceability_warnings, ScriptOutcome};

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{
    extract_tagged_block, CallRole, ChatMessage, ChatRequest, GatewayError, LlmGateway,
    MissingSection,
};
use crate::playbook::{sample_selections, Catalog, TechniqueId, TechniqueSelection, ITERATIONS};
use crate::script::ScriptError;

pub const PREMISE_WORDS: RangeInclusive<usize> = 50..=100;
pub const REFINEMENT_PASSES: u32 = 3;
pub const JUDGES: usize = 3;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{stage}{}: {source}", iteration.map(|i| format!(" (iteration {i})")).unwrap_or_default())]
    MissingSection {
        stage: &'static str,
        iteration: Option<u8>,
        source: MissingSection,
    },
    #[error("critique for iteration {iteration} has an empty comment")]
    EmptyComment { iteration: u8 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("judge {judge} named no candidate")]
    UnparsableBallot { judge: u8 },
    #[error("segmentation failed: {reason}")]
    Segmentation { reason: String },
    #[error("generated script is invalid: {0}")]
    InvalidScript(ScriptError),
}

impl GenerationError {
    pub fn is_provider_failure(&self) -> bool {
        matches!(self, GenerationError::Gateway(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremiseParagraph {
    pub text: String,
    pub word_count: usize,
}

impl PremiseParagraph {
    pub fn new(text: impl Into<String>) -> Result<Self, GenerationError> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(GenerationError::Precondition("premise is empty".into()));
        }
        let word_count = text.split_whitespace().count();
        Ok(Self { text, word_count })
    }

    /// Soft length check; out-of-range premises still generate.
    pub fn warning(&self) -> Option<String> {
        (!PREMISE_WORDS.contains(&self.word_count)).then(|| {
            format!(
                "premise has {} words; {}-{} works best",
                self.word_count,
                PREMISE_WORDS.start(),
                PREMISE_WORDS.end()
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub techniques_found: Vec<TechniqueId>,
    pub effectiveness: String,
    pub comment: String,
}

impl Critique {
    /// Selected techniques the critic did not find.
    pub fn missing(&self, selection: &TechniqueSelection) -> Vec<TechniqueId> {
        selection
            .techniques
            .iter()
            .copied()
            .filter(|t| !self.techniques_found.contains(t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    /// 1-based judge index.
    pub judge: u8,
    /// 1-based candidate index.
    pub choice: u8,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub ballots: Vec<Ballot>,
    pub winner: u8,
    /// No strict majority; the lowest voted index won.
    pub tie: bool,
}

/// Majority winner, or the lowest voted index when no choice has a majority.
pub fn tally(choices: &[u8]) -> Option<(u8, bool)> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for c in choices {
        *counts.entry(*c).or_default() += 1;
    }
    let (&top, &top_count) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
    if top_count * 2 > choices.len() {
        Some((top, false))
    } else {
        counts.keys().next().map(|&lowest| (lowest, true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub revise_rounds: u32,
    /// Optional per-judge model overrides, by judge position.
    #[serde(default)]
    pub judge_models: Vec<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            revise_rounds: 1,
            judge_models: Vec::new(),
        }
    }
}

impl GenerationConfig {
    /// Calls issued by a run without repairs.
    pub fn expected_calls(&self) -> usize {
        ITERATIONS * (1 + 2 * self.revise_rounds as usize) + JUDGES + REFINEMENT_PASSES as usize
    }
}

fn section(
    response: &str,
    tag: &str,
    stage: &'static str,
    iteration: Option<u8>,
    warnings: &mut Vec<String>,
) -> Result<String, GenerationError> {
    let block = extract_tagged_block(response, tag).map_err(|source| GenerationError::MissingSection {
        stage,
        iteration,
        source,
    })?;
    if block.ambiguous {
        warnings.push(format!("{stage}: more than one `{tag}` section, used the first"));
    }
    Ok(block.text)
}

fn optional_section(response: &str, tag: &str) -> String {
    extract_tagged_block(response, tag).map(|b| b.text).unwrap_or_default()
}

/// One writer call producing characters, outline and story.
pub fn generate_candidate(
    premise: &PremiseParagraph,
    selection: &TechniqueSelection,
    gateway: &LlmGateway,
    warnings: &mut Vec<String>,
) -> Result<Story, GenerationError> {
    let request = prompts::writer(Catalog::bundled(), &premise.text, selection);
    let reply = gateway.complete(&request)?;
    let it = Some(selection.iteration);
    let outline = section(&reply.text, prompts::OUTLINE, "writer", it, warnings)?;
    let text = section(&reply.text, prompts::COMPLETE_STORY, "writer", it, warnings)?;
    let characters = optional_section(&reply.text, prompts::CHARACTERS);
    if characters.is_empty() {
        warnings.push(format!("writer (iteration {}): no character introductions", selection.iteration));
    }
    let story = Story::from_text(&text, outline, characters, selection.clone());
    if story.sentences.is_empty() {
        return Err(GenerationError::Precondition(format!(
            "writer (iteration {}) returned an empty story",
            selection.iteration
        )));
    }
    Ok(story)
}

pub fn critique_story(story: &Story, gateway: &LlmGateway, warnings: &mut Vec<String>) -> Result<Critique, GenerationError> {
    if story.sentences.is_empty() {
        return Err(GenerationError::Precondition("cannot critique an empty story".into()));
    }
    let it = Some(story.selection.iteration);
    let reply = gateway.complete(&prompts::critic(Catalog::bundled(), story))?;
    let used = section(&reply.text, prompts::TECHNIQUES_USED, "critic", it, warnings)?;
    let comment = section(&reply.text, prompts::COMMENT, "critic", it, warnings)?;
    let effectiveness = optional_section(&reply.text, prompts::EFFECTIVENESS);
    let techniques_found = TechniqueId::mentioned_in(&used)
        .into_iter()
        .filter(|t| story.selection.includes(*t))
        .collect();
    Ok(Critique {
        techniques_found,
        effectiveness,
        comment,
    })
}

pub fn revise_story(
    story: &Story,
    critique: &Critique,
    gateway: &LlmGateway,
    warnings: &mut Vec<String>,
) -> Result<Story, GenerationError> {
    let iteration = story.selection.iteration;
    if critique.comment.trim().is_empty() {
        return Err(GenerationError::EmptyComment { iteration });
    }
    let reply = gateway.complete(&prompts::reviser(story, &critique.comment))?;
    let text = section(&reply.text, prompts::NEW_STORY, "reviser", Some(iteration), warnings)?;
    let mut revised = Story::from_text(&text, story.outline.clone(), story.characters.clone(), story.selection.clone());
    if revised.sentences.is_empty() {
        return Err(GenerationError::Precondition(format!(
            "reviser (iteration {iteration}) returned an empty story"
        )));
    }
    revised.revision_round = story.revision_round + 1;
    Ok(revised)
}

fn parse_choice(response: &str, candidates: usize) -> Option<u8> {
    let in_range = |d: u32| (1..=candidates as u32).contains(&d);
    if let Ok(block) = extract_tagged_block(response, prompts::CHOICE) {
        if let Some(d) = block.text.chars().find_map(|c| c.to_digit(10)) {
            return in_range(d).then_some(d as u8);
        }
    }
    let lower = response.to_lowercase();
    lower.match_indices("story ").find_map(|(i, m)| {
        let d = lower[i + m.len()..].chars().next()?.to_digit(10)?;
        in_range(d).then_some(d as u8)
    })
}

/// Three judge calls with independent, fresh contexts.
pub fn vote_best(
    premise: &PremiseParagraph,
    candidates: &[Story],
    gateway: &LlmGateway,
    judge_models: &[String],
) -> Result<VoteRecord, GenerationError> {
    if candidates.len() != ITERATIONS {
        return Err(GenerationError::Precondition(format!(
            "voting needs exactly {ITERATIONS} candidates, got {}",
            candidates.len()
        )));
    }
    let mut ballots = Vec::with_capacity(JUDGES);
    for j in 0..JUDGES {
        let judge = (j + 1) as u8;
        let request = prompts::judge(&premise.text, candidates).with_model(judge_models.get(j).cloned());
        let reply = gateway.complete(&request)?;
        let choice = parse_choice(&reply.text, candidates.len()).ok_or(GenerationError::UnparsableBallot { judge })?;
        ballots.push(Ballot {
            judge,
            choice,
            rationale: optional_section(&reply.text, prompts::RATIONALE),
        });
    }
    let choices: Vec<u8> = ballots.iter().map(|b| b.choice).collect();
    let (winner, tie) = tally(&choices).expect("three ballots");
    Ok(VoteRecord { ballots, winner, tie })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub story: Story,
    pub attempts: u32,
    pub violations: Vec<RefinementViolation>,
    /// Both attempts broke the contract; the pre-pass story was kept.
    pub fell_back: bool,
}

fn describe(violations: &[RefinementViolation]) -> String {
    violations
        .iter()
        .map(|v| match v {
            RefinementViolation::Untagged => "no tagged sentences".to_string(),
            RefinementViolation::Missing { id } => format!("[s{id}] is missing"),
            RefinementViolation::Duplicate { id } => format!("[s{id}] appears twice"),
            RefinementViolation::Unknown { id } => format!("[s{id}] does not exist"),
            RefinementViolation::OutOfOrder { id } => format!("[s{id}] is out of order"),
            RefinementViolation::EmptySentence { id } => format!("sentence {id} is empty"),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// One refinement pass, with a single repair attempt on a contract breach.
pub fn refine_story(story: &Story, gateway: &LlmGateway) -> Result<RefineOutcome, GenerationError> {
    if story.refinement_round >= REFINEMENT_PASSES {
        return Err(GenerationError::Precondition(format!(
            "story already refined {} times",
            story.refinement_round
        )));
    }
    let mut request = prompts::refiner(story);
    let mut attempts = 0;
    let mut violations = Vec::new();
    while attempts < 2 {
        attempts += 1;
        let reply = gateway.complete(&request)?;
        let body = extract_tagged_block(&reply.text, prompts::REFINED_STORY)
            .map(|b| b.text)
            .unwrap_or_else(|_| reply.text.clone());
        match apply_refinement(story, &body) {
            Ok(mut refined) => {
                refined.refinement_round = story.refinement_round + 1;
                return Ok(RefineOutcome {
                    story: refined,
                    attempts,
                    violations,
                    fell_back: false,
                });
            }
            Err(found) => {
                request.messages.push(ChatMessage::assistant(reply.text));
                request.messages.push(ChatMessage::user(prompts::refiner_repair(&describe(&found))));
                violations.extend(found);
            }
        }
    }
    let mut kept = story.clone();
    kept.refinement_round = story.refinement_round + 1;
    Ok(RefineOutcome {
        story: kept,
        attempts,
        violations,
        fell_back: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionRound {
    pub critique: Critique,
    pub revised: Story,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub selection: TechniqueSelection,
    pub draft: Story,
    pub rounds: Vec<RevisionRound>,
}

impl CandidateRecord {
    pub fn final_story(&self) -> &Story {
        self.rounds.last().map_or(&self.draft, |r| &r.revised)
    }
}

/// Everything a run did, serialisable as the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub premise: PremiseParagraph,
    pub rng_seed: u64,
    pub config: GenerationConfig,
    pub selections: Vec<TechniqueSelection>,
    pub candidates: Vec<CandidateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<VoteRecord>,
    pub refinements: Vec<RefineOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_story: Option<Story>,
    /// Successful provider calls by role, repairs included.
    pub calls: BTreeMap<CallRole, usize>,
    pub total_calls: usize,
    pub repair_calls: usize,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunReport {
    fn new(premise: &PremiseParagraph, rng_seed: u64, config: &GenerationConfig) -> Self {
        Self {
            premise: premise.clone(),
            rng_seed,
            config: config.clone(),
            selections: Vec::new(),
            candidates: Vec::new(),
            vote: None,
            refinements: Vec::new(),
            final_story: None,
            calls: BTreeMap::new(),
            total_calls: 0,
            repair_calls: 0,
            warnings: Vec::new(),
            failure: None,
        }
    }

    fn record_calls(&mut self, gateway: &LlmGateway, from: usize) {
        self.calls.clear();
        for exchange in gateway.log().snapshot().into_iter().skip(from).filter(|e| e.succeeded()) {
            *self.calls.entry(exchange.request.role).or_default() += 1;
        }
        self.total_calls = self.calls.values().sum();
        self.repair_calls = self.refinements.iter().map(|r| r.attempts as usize - 1).sum();
    }
}

#[derive(Debug, Error)]
#[error("generation failed: {error}")]
pub struct PipelineFailure {
    pub error: GenerationError,
    pub report: Box<RunReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub story: Story,
    pub report: RunReport,
}

/// Sample, draft/critique/revise three candidates, vote, refine three times.
pub fn run_pipeline(
    premise: &PremiseParagraph,
    rng_seed: u64,
    gateway: &LlmGateway,
    config: &GenerationConfig,
) -> Result<PipelineOutput, PipelineFailure> {
    let start = gateway.log().len();
    let mut report = RunReport::new(premise, rng_seed, config);
    match pipeline_stages(premise, rng_seed, gateway, config, &mut report) {
        Ok(story) => {
            report.record_calls(gateway, start);
            report.final_story = Some(story.clone());
            Ok(PipelineOutput { story, report })
        }
        Err(error) => {
            report.record_calls(gateway, start);
            report.failure = Some(error.to_string());
            Err(PipelineFailure {
                error,
                report: Box::new(report),
            })
        }
    }
}

fn pipeline_stages(
    premise: &PremiseParagraph,
    rng_seed: u64,
    gateway: &LlmGateway,
    config: &GenerationConfig,
    report: &mut RunReport,
) -> Result<Story, GenerationError> {
    if let Some(w) = premise.warning() {
        tracing::warn!("{w}");
        report.warnings.push(w);
    }
    report.selections = sample_selections(rng_seed);

    for selection in report.selections.clone() {
        let draft = generate_candidate(premise, &selection, gateway, &mut report.warnings)?;
        report.candidates.push(CandidateRecord {
            selection: selection.clone(),
            draft: draft.clone(),
            rounds: Vec::new(),
        });
        let mut current = draft;
        for _ in 0..config.revise_rounds {
            let critique = critique_story(&current, gateway, &mut report.warnings)?;
            let revised = revise_story(&current, &critique, gateway, &mut report.warnings)?;
            report
                .candidates
                .last_mut()
                .expect("candidate just pushed")
                .rounds
                .push(RevisionRound {
                    critique,
                    revised: revised.clone(),
                });
            current = revised;
        }
    }

    let finals: Vec<Story> = report.candidates.iter().map(|c| c.final_story().clone()).collect();
    let vote = vote_best(premise, &finals, gateway, &config.judge_models)?;
    if vote.tie {
        report
            .warnings
            .push(format!("judges split three ways; candidate {} wins as lowest index", vote.winner));
    }
    let mut story = finals[vote.winner as usize - 1].clone();
    report.vote = Some(vote);

    for pass in 1..=REFINEMENT_PASSES {
        let outcome = refine_story(&story, gateway)?;
        if outcome.fell_back {
            report
                .warnings
                .push(format!("refinement pass {pass} broke sentence tags twice; kept the previous story"));
        }
        story = outcome.story.clone();
        report.refinements.push(outcome);
    }
    Ok(story)
}

/// How often the critic found each selected technique across a report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdherenceRow {
    pub selected: usize,
    pub found: usize,
}

pub fn adherence(report: &RunReport) -> BTreeMap<TechniqueId, AdherenceRow> {
    let mut rows: BTreeMap<TechniqueId, AdherenceRow> = BTreeMap::new();
    for candidate in &report.candidates {
        for round in &candidate.rounds {
            for t in &candidate.selection.techniques {
                let row = rows.entry(*t).or_default();
                row.selected += 1;
                if round.critique.techniques_found.contains(t) {
                    row.found += 1;
                }
            }
        }
    }
    rows
}

/// Appends a follow-up turn to a request, keeping its role and params.
pub(crate) fn follow_up(request: &ChatRequest, reply: String, message: String) -> ChatRequest {
    let mut next = request.clone();
    next.messages.push(ChatMessage::assistant(reply));
    next.messages.push(ChatMessage::user(message));
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_majority_and_tie() {
        assert_eq!(tally(&[1, 1, 2]), Some((1, false)));
        assert_eq!(tally(&[3, 2, 3]), Some((3, false)));
        assert_eq!(tally(&[1, 2, 3]), Some((1, true)));
        assert_eq!(tally(&[3, 2, 2]), Some((2, false)));
        assert_eq!(tally(&[]), None);
    }

    #[test]
    fn premise_soft_warning() {
        let short = PremiseParagraph::new("word ".repeat(30)).unwrap();
        assert_eq!(short.word_count, 30);
        assert!(short.warning().is_some());
        let fine = PremiseParagraph::new("word ".repeat(60)).unwrap();
        assert!(fine.warning().is_none());
        assert!(PremiseParagraph::new("   ").is_err());
    }

    #[test]
    fn choice_parsing() {
        assert_eq!(parse_choice("### Choice\n2\n### Rationale\nbest", 3), Some(2));
        assert_eq!(parse_choice("I prefer Story 3 overall.", 3), Some(3));
        assert_eq!(parse_choice("### Choice\n7", 3), None);
        assert_eq!(parse_choice("none of them", 3), None);
    }

    #[test]
    fn expected_calls_law() {
        assert_eq!(GenerationConfig::default().expected_calls(), 15);
        let two = GenerationConfig {
            revise_rounds: 2,
            ..Default::default()
        };
        assert_eq!(two.expected_calls(), 21);
    }
}
