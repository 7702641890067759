//! Story to script: one transformer call, one repair retry.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{follow_up, prompts, GenerationError, Story, REFINEMENT_PASSES};
use crate::llm::{extract_tagged_block, LlmGateway};
use crate::script::{parse_script, validate_generated, DramaScript, ScriptError};

const FLASHBACK_MARKERS: [&str; 4] = ["flashback", "flash-forward", "flash forward", "years earlier"];

/// Whether any sentence carries an explicit flashback marker.
pub fn story_has_flashback(story: &Story) -> bool {
    story.sentences.iter().any(|s| {
        let lower = s.text.to_lowercase();
        FLASHBACK_MARKERS.iter().any(|m| lower.contains(m))
    })
}

fn content_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() > 3)
        .map(str::to_lowercase)
        .collect()
}

/// Plots whose content words mostly do not occur in the story.
pub fn traceability_warnings(story: &Story, script: &DramaScript) -> Vec<String> {
    let story_words: HashSet<String> = content_words(&format!("{}\n{}", story.text(), story.characters))
        .into_iter()
        .collect();
    let mut warnings = Vec::new();
    for scene in &script.scenes {
        for plot in scene.plot_chain.iter() {
            let words = content_words(&plot.description);
            if words.is_empty() {
                continue;
            }
            let hits = words.iter().filter(|w| story_words.contains(*w)).count();
            if hits * 2 < words.len() {
                warnings.push(format!(
                    "scene {} plot {}: only {hits}/{} content words appear in the story",
                    scene.index,
                    plot.id,
                    words.len()
                ));
            }
        }
    }
    warnings
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptOutcome {
    pub script: DramaScript,
    pub attempts: u32,
    pub warnings: Vec<String>,
}

enum Problem {
    Invalid(ScriptError),
    SceneCount(usize),
    FlashbackNotIsolated,
}

impl Problem {
    fn describe(&self) -> String {
        match self {
            Problem::Invalid(e) => e.to_string(),
            Problem::SceneCount(n) => format!("it has {n} scenes; use 3 to 5"),
            Problem::FlashbackNotIsolated => {
                "the story contains a flashback but no scene sets \"is_flashback\": true".into()
            }
        }
    }

    fn into_error(self) -> GenerationError {
        match self {
            Problem::Invalid(e) => GenerationError::InvalidScript(e),
            Problem::SceneCount(n) => GenerationError::Segmentation {
                reason: format!("{n} scenes after repair; expected 3 to 5"),
            },
            Problem::FlashbackNotIsolated => GenerationError::Segmentation {
                reason: "flashback material not isolated into its own scene".into(),
            },
        }
    }
}

fn json_body(response: &str) -> String {
    let body = extract_tagged_block(response, prompts::SCRIPT)
        .map(|b| b.text)
        .unwrap_or_else(|_| response.to_string());
    match (body.find('{'), body.rfind('}')) {
        (Some(a), Some(b)) if a < b => body[a..=b].to_string(),
        _ => body,
    }
}

fn check(response: &str, needs_flashback: bool) -> Result<DramaScript, Problem> {
    let script = parse_script(&json_body(response)).map_err(Problem::Invalid)?;
    let n = script.scenes.len();
    if !(3..=5).contains(&n) {
        return Err(Problem::SceneCount(n));
    }
    validate_generated(&script).map_err(Problem::Invalid)?;
    if needs_flashback && !script.scenes.iter().any(|s| s.is_flashback) {
        return Err(Problem::FlashbackNotIsolated);
    }
    Ok(script)
}

pub fn story_to_script(story: &Story, gateway: &LlmGateway) -> Result<ScriptOutcome, GenerationError> {
    if story.refinement_round != REFINEMENT_PASSES {
        return Err(GenerationError::Precondition(format!(
            "story must be refined {REFINEMENT_PASSES} times before scripting (has {})",
            story.refinement_round
        )));
    }
    let needs_flashback = story_has_flashback(story);
    let mut request = prompts::transformer(story);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let reply = gateway.complete(&request)?;
        match check(&reply.text, needs_flashback) {
            Ok(script) => {
                let mut warnings = traceability_warnings(story, &script);
                if attempts > 1 {
                    warnings.insert(0, "transformer needed a repair retry".into());
                }
                return Ok(ScriptOutcome {
                    script,
                    attempts,
                    warnings,
                });
            }
            Err(problem) if attempts >= 2 => return Err(problem.into_error()),
            Err(problem) => {
                request = follow_up(&request, reply.text, prompts::transformer_repair(&problem.describe()));
            }
        }
    }
}
