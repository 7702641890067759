//! Proposal parsing and the script-leakage lint for plot reflection.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::llm::MalformedDecision;
use crate::script::{DramaScript, Plot, PlotChain, PlotChainDiff, ReflectionVerdict};

/// One reflection point, whatever its outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionRecord {
    pub scene_index: u32,
    pub scene_moment: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<PlotChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ReflectionVerdict>,
    /// Provider or parse failure; the chain was kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lint: Vec<LeakageFlag>,
}

impl ReflectionRecord {
    pub fn accepted_chain(&self) -> Option<&PlotChain> {
        match &self.verdict {
            Some(v @ ReflectionVerdict::Accepted { .. }) => Some(v.chain()),
            _ => None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.accepted_chain().is_some()
    }

    /// Accepted and actually different from the previous chain.
    pub fn is_adaptation(&self) -> bool {
        matches!(&self.verdict, Some(ReflectionVerdict::Accepted { diff, .. }) if !diff.is_empty())
    }

    pub fn is_rejected(&self) -> bool {
        matches!(self.verdict, Some(ReflectionVerdict::Rejected { .. }))
    }
}

fn parse_plot_line(line: &str) -> Option<(bool, &str, &str)> {
    let rest = line.trim().trim_start_matches(['-', '*']).trim_start();
    let rest = rest.strip_prefix('[')?;
    let (mark, rest) = rest.split_once(']')?;
    let completed = match mark.trim() {
        "" => false,
        "x" | "X" => true,
        _ => return None,
    };
    let (id, description) = rest.split_once(':')?;
    Some((completed, id.trim(), description.trim()))
}

/// Parses a `PLOTS:` block into a chain. Existing ids keep their owner and
/// origin; `+` lines become new reflected plots with fresh ids.
pub fn parse_proposal(response: &str, old: &PlotChain) -> Result<PlotChain, MalformedDecision> {
    let mut plots: Vec<Plot> = Vec::new();
    for line in response.lines() {
        let Some((completed, id, description)) = parse_plot_line(line) else {
            continue;
        };
        let plot = if id == "+" || id.eq_ignore_ascii_case("new") {
            let taken: PlotChain = old.iter().chain(plots.iter()).cloned().collect();
            Plot::new(taken.fresh_id("r"), description).reflected().completed(completed)
        } else {
            let mut plot = old
                .get(id)
                .cloned()
                .unwrap_or_else(|| Plot::new(id, description).reflected());
            plot.description = description.to_string();
            plot.completed = completed;
            plot
        };
        plots.push(plot);
    }
    if plots.is_empty() {
        return Err(MalformedDecision("reflection returned no plot lines".into()));
    }
    Ok(PlotChain::new(plots))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageKind {
    /// Named only in scenes the player has not reached.
    FutureScene,
    /// Named nowhere in the script or the conversation.
    AbsentFromScript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageFlag {
    pub plot_id: String,
    pub term: String,
    pub kind: LeakageKind,
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
}

fn vocabulary<'a>(texts: impl Iterator<Item = &'a str>) -> HashSet<String> {
    texts.flat_map(words).map(str::to_lowercase).collect()
}

/// Capitalised words after the first, i.e. likely names and places.
fn entities(description: &str) -> Vec<&str> {
    words(description)
        .skip(1)
        .filter(|w| w.chars().count() > 2 && w.chars().next().is_some_and(char::is_uppercase))
        .collect()
}

/// Flags entities in inserted or rewritten plots that come from future
/// scenes or from nowhere. Flag-only; nothing is repaired.
pub fn leakage_lint(
    script: &DramaScript,
    scene_cursor: usize,
    diff: &PlotChainDiff,
    conversation: &[&str],
) -> Vec<LeakageFlag> {
    let scene_texts = |range: &[crate::script::Scene]| -> Vec<String> {
        range
            .iter()
            .flat_map(|s| {
                let mut t = vec![s.background.clone(), s.location.clone()];
                t.extend(s.setups.iter().map(|(k, v)| format!("{k} {v}")));
                t.extend(s.plot_chain.iter().map(|p| p.description.clone()));
                t
            })
            .collect()
    };
    let split = (scene_cursor + 1).min(script.scenes.len());
    let mut known_texts = vec![script.title.clone(), script.background.clone()];
    known_texts.extend(script.roster.iter().map(|c| format!("{} {}", c.name, c.description)));
    known_texts.extend(scene_texts(&script.scenes[..split]));
    known_texts.extend(conversation.iter().map(|s| s.to_string()));
    let known = vocabulary(known_texts.iter().map(String::as_str));
    let future_texts = scene_texts(&script.scenes[split..]);
    let future = vocabulary(future_texts.iter().map(String::as_str));

    let changed = diff
        .modified
        .iter()
        .map(|e| (e.id.as_str(), e.new_description.as_str()))
        .chain(diff.inserted.iter().map(|i| (i.plot.id.as_str(), i.plot.description.as_str())));
    let mut flags = Vec::new();
    for (id, description) in changed {
        for term in entities(description) {
            let lower = term.to_lowercase();
            if known.contains(&lower) {
                continue;
            }
            let kind = if future.contains(&lower) {
                LeakageKind::FutureScene
            } else {
                LeakageKind::AbsentFromScript
            };
            flags.push(LeakageFlag {
                plot_id: id.to_string(),
                term: term.to_string(),
                kind,
            });
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::PlotOrigin;

    fn chain() -> PlotChain {
        PlotChain::new(vec![
            Plot::new("p1", "Open the door").completed(true),
            Plot::new("p2", "Find the key").owned_by("Ana"),
        ])
    }

    #[test]
    fn parses_existing_and_new_plots() {
        let out = parse_proposal(
            "PLOTS:\n[x] p1: Open the door\n[ ] p2: Find the brass key\n- [ ] +: Ana hides the key",
            &chain(),
        )
        .unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out.get("p2").unwrap().owner.as_deref(), Some("Ana"));
        assert_eq!(out.get("p2").unwrap().description, "Find the brass key");
        let new = out.get("r1").unwrap();
        assert_eq!(new.origin, PlotOrigin::Reflected);
        assert!(!new.completed);
    }

    #[test]
    fn empty_proposal_is_malformed() {
        assert!(parse_proposal("I would keep things as they are.", &chain()).is_err());
    }

    #[test]
    fn entity_extraction_skips_first_word() {
        assert_eq!(entities("Wren visits the Old Mill with Ana"), vec!["Old", "Mill", "Ana"]);
    }
}
