//! Stories as ordered, id-tagged narrative sentences.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::playbook::TechniqueSelection;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub paragraph_start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub sentences: Vec<Sentence>,
    pub outline: String,
    /// Character introductions from the writer, verbatim.
    #[serde(default)]
    pub characters: String,
    pub selection: TechniqueSelection,
    pub revision_round: u32,
    pub refinement_round: u32,
}

impl Story {
    pub fn from_text(
        text: &str,
        outline: impl Into<String>,
        characters: impl Into<String>,
        selection: TechniqueSelection,
    ) -> Self {
        Self {
            sentences: split_sentences(text),
            outline: outline.into(),
            characters: characters.into(),
            selection,
            revision_round: 0,
            refinement_round: 0,
        }
    }

    /// Plain prose: sentences joined by spaces, paragraphs by blank lines.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sentences.iter().enumerate() {
            if i > 0 {
                out.push_str(if s.paragraph_start { "\n\n" } else { " " });
            }
            out.push_str(&s.text);
        }
        out
    }

    pub fn word_count(&self) -> usize {
        self.sentences
            .iter()
            .map(|s| s.text.split_whitespace().count())
            .sum()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.sentences.iter().map(|s| s.id).collect()
    }

    pub fn next_id(&self) -> u32 {
        self.sentences.iter().map(|s| s.id).max().map_or(1, |m| m + 1)
    }

    /// One `[sN] text` line per sentence, blank line between paragraphs.
    pub fn tagged_text(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.sentences.iter().enumerate() {
            if i > 0 && s.paragraph_start {
                out.push('\n');
            }
            out.push_str(&format!("[s{}] {}\n", s.id, s.text));
        }
        out
    }
}

const ABBREVIATIONS: [&str; 9] = ["mr", "mrs", "ms", "dr", "st", "mt", "jr", "sr", "vs"];

fn ends_with_abbreviation(current: &str) -> bool {
    let last = current
        .trim_end_matches('.')
        .rsplit(|c: char| c.is_whitespace())
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    ABBREVIATIONS.contains(&last.as_str()) || (last.len() == 1 && last.chars().all(char::is_alphabetic))
}

/// Splits prose into sentences at `.`, `!`, `?` (plus trailing quotes or
/// brackets) followed by whitespace. Blank lines start new paragraphs.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let normalized = text.replace("\r\n", "\n");
    let mut sentences = Vec::new();
    let mut next_id = 1u32;

    for (p, paragraph) in normalized
        .split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .enumerate()
    {
        let flat = paragraph.split_whitespace().collect::<Vec<_>>().join(" ");
        let chars: Vec<char> = flat.chars().collect();
        let mut current = String::new();
        let mut first_in_paragraph = true;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            current.push(c);
            if matches!(c, '.' | '!' | '?') {
                while i + 1 < chars.len() && matches!(chars[i + 1], '.' | '!' | '?' | '"' | '\'' | '”' | '’' | ')') {
                    i += 1;
                    current.push(chars[i]);
                }
                let continues_lower = chars.get(i + 2).is_some_and(|n| n.is_lowercase());
                let at_boundary =
                    i + 1 >= chars.len() || (chars[i + 1].is_whitespace() && !continues_lower);
                if at_boundary && !(c == '.' && ends_with_abbreviation(&current)) {
                    sentences.push(Sentence {
                        id: next_id,
                        text: current.trim().to_string(),
                        paragraph_start: first_in_paragraph && p > 0,
                    });
                    next_id += 1;
                    first_in_paragraph = false;
                    current.clear();
                }
            }
            i += 1;
        }
        if !current.trim().is_empty() {
            sentences.push(Sentence {
                id: next_id,
                text: current.trim().to_string(),
                paragraph_start: first_in_paragraph && p > 0,
            });
            next_id += 1;
        }
    }
    sentences
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefinementViolation {
    /// The output carried no sentence tags at all.
    Untagged,
    Missing { id: u32 },
    Duplicate { id: u32 },
    Unknown { id: u32 },
    OutOfOrder { id: u32 },
    EmptySentence { id: u32 },
}

#[derive(Debug, PartialEq, Eq)]
enum Tag {
    Existing(u32),
    New,
}

fn parse_tag(line: &str) -> Option<(Tag, &str)> {
    let rest = line.strip_prefix('[')?;
    let (tag, text) = rest.split_once(']')?;
    let tag = tag.trim();
    let parsed = if tag == "+" || tag.eq_ignore_ascii_case("new") {
        Tag::New
    } else {
        Tag::Existing(tag.strip_prefix(['s', 'S'])?.parse().ok()?)
    };
    Some((parsed, text.trim()))
}

/// Rebuilds a story from refined `[sN]` / `[+]` lines and checks that every
/// original sentence survives, once, in its original order.
pub fn apply_refinement(before: &Story, refined: &str) -> Result<Story, Vec<RefinementViolation>> {
    let mut tagged: Vec<(Tag, String, bool)> = Vec::new();
    let mut blank_seen = false;
    for line in refined.replace("\r\n", "\n").lines() {
        let line = line.trim();
        if line.is_empty() {
            blank_seen = true;
            continue;
        }
        match parse_tag(line) {
            Some((tag, text)) => {
                tagged.push((tag, text.to_string(), blank_seen));
                blank_seen = false;
            }
            None => {
                if let Some((_, text, _)) = tagged.last_mut() {
                    text.push(' ');
                    text.push_str(line);
                }
            }
        }
    }
    if tagged.is_empty() {
        return Err(vec![RefinementViolation::Untagged]);
    }

    let original: Vec<u32> = before.ids();
    let known: HashSet<u32> = original.iter().copied().collect();
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut order = Vec::new();
    let mut next_id = before.next_id();
    let mut sentences = Vec::new();

    for (tag, text, blank_before) in tagged {
        let id = match tag {
            Tag::Existing(id) => {
                if !known.contains(&id) {
                    violations.push(RefinementViolation::Unknown { id });
                    continue;
                }
                if !seen.insert(id) {
                    violations.push(RefinementViolation::Duplicate { id });
                    continue;
                }
                order.push(id);
                id
            }
            Tag::New => {
                next_id += 1;
                next_id - 1
            }
        };
        if text.is_empty() {
            violations.push(RefinementViolation::EmptySentence { id });
        }
        let paragraph_start = if sentences.is_empty() { false } else { blank_before };
        sentences.push(Sentence {
            id,
            text,
            paragraph_start,
        });
    }
    for id in &original {
        if !seen.contains(id) {
            violations.push(RefinementViolation::Missing { id: *id });
        }
    }
    let surviving: Vec<u32> = original.iter().copied().filter(|id| seen.contains(id)).collect();
    if let Some((_, found)) = surviving.iter().zip(&order).find(|(a, b)| a != b) {
        violations.push(RefinementViolation::OutOfOrder { id: *found });
    }

    if violations.is_empty() {
        Ok(Story {
            sentences,
            refinement_round: before.refinement_round,
            ..before.clone()
        })
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playbook::{SituationId, TechniqueId};

    fn selection() -> TechniqueSelection {
        TechniqueSelection {
            situation: SituationId::Love,
            techniques: vec![TechniqueId::Suspense, TechniqueId::Twist, TechniqueId::Irony],
            iteration: 1,
        }
    }

    fn story(text: &str) -> Story {
        Story::from_text(text, "outline", "", selection())
    }

    #[test]
    fn splits_sentences_and_paragraphs() {
        let s = split_sentences("The ferry stops. Mr. Hale frowns! \"Why?\" she asks.\n\nLater, rain.");
        let texts: Vec<_> = s.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["The ferry stops.", "Mr. Hale frowns!", "\"Why?\" she asks.", "Later, rain."]);
        assert_eq!(s.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(s[3].paragraph_start);
        assert!(!s[0].paragraph_start);
    }

    #[test]
    fn text_round_trips_through_split() {
        let st = story("One. Two.\n\nThree.");
        assert_eq!(st.text(), "One. Two.\n\nThree.");
        assert_eq!(split_sentences(&st.text()), st.sentences);
    }

    #[test]
    fn refinement_with_insert_keeps_order() {
        let st = story("A one. B two. C three.");
        let refined = "[s1] A one, slowly.\n[s2] B two.\n[+] Between two and three.\n[s3] C three.";
        let out = apply_refinement(&st, refined).unwrap();
        assert_eq!(out.ids(), vec![1, 2, 4, 3]);
        assert_eq!(out.sentences[0].text, "A one, slowly.");
    }

    #[test]
    fn refinement_deleting_a_sentence_is_flagged() {
        let st = story("A one. B two. C three.");
        let err = apply_refinement(&st, "[s2] B two.\n[s3] C three.").unwrap_err();
        assert_eq!(err, vec![RefinementViolation::Missing { id: 1 }]);
    }

    #[test]
    fn refinement_reordering_is_flagged() {
        let st = story("A one. B two.");
        let err = apply_refinement(&st, "[s2] B two.\n[s1] A one.").unwrap_err();
        assert!(err.contains(&RefinementViolation::OutOfOrder { id: 2 }));
    }

    #[test]
    fn untagged_refinement_is_flagged() {
        let st = story("A one.");
        assert_eq!(
            apply_refinement(&st, "A one, expanded.").unwrap_err(),
            vec![RefinementViolation::Untagged]
        );
    }
}
