//! Line-oriented `KEY: value` grammar used by every runtime call.
//!
//! The full grammar is documented in `docs/decision-grammar.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Keys recognised at the start of a line.
pub const DECISION_KEYS: [&str; 8] = [
    "COMPLETED",
    "SPEAKER",
    "TO",
    "SAY",
    "ACTION",
    "CLASS",
    "STRATEGY",
    "MOTIVATION",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed decision: {0}")]
pub struct MalformedDecision(pub String);

fn malformed<T>(msg: impl Into<String>) -> Result<T, MalformedDecision> {
    Err(MalformedDecision(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputClass {
    InPlot,
    Daily,
    Breaking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    Avoid,
    IgnoreQuestion,
    Associate,
}

fn squash(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

impl FromStr for InputClass {
    type Err = MalformedDecision;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match squash(s).as_str() {
            "inplot" => Ok(InputClass::InPlot),
            "daily" => Ok(InputClass::Daily),
            "breaking" => Ok(InputClass::Breaking),
            _ => malformed(format!("unknown CLASS `{s}`")),
        }
    }
}

impl FromStr for Strategy {
    type Err = MalformedDecision;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match squash(s).as_str() {
            "avoid" => Ok(Strategy::Avoid),
            "ignorequestion" => Ok(Strategy::IgnoreQuestion),
            "associate" => Ok(Strategy::Associate),
            _ => malformed(format!("unknown STRATEGY `{s}`")),
        }
    }
}

impl fmt::Display for InputClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputClass::InPlot => "InPlot",
            InputClass::Daily => "Daily",
            InputClass::Breaking => "Breaking",
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Avoid => "Avoid",
            Strategy::IgnoreQuestion => "Ignore-Question",
            Strategy::Associate => "Associate",
        })
    }
}

/// Raw keyed fields of a response.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyedResponse {
    fields: BTreeMap<String, String>,
}

impl KeyedResponse {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, MalformedDecision> {
        match self.get(key) {
            Some(v) if !v.is_empty() => Ok(v),
            Some(_) => malformed(format!("{key} is empty")),
            None => malformed(format!("missing {key} line")),
        }
    }

    pub fn optional(&self, key: &str) -> Option<&str> {
        self.get(key).filter(|v| !v.is_empty())
    }

    pub fn completed(&self) -> Result<Vec<String>, MalformedDecision> {
        parse_id_list(self.get("COMPLETED").unwrap_or(""))
    }

    pub fn class(&self) -> Result<Option<InputClass>, MalformedDecision> {
        self.optional("CLASS").map(str::parse).transpose()
    }

    pub fn strategy(&self) -> Result<Option<Strategy>, MalformedDecision> {
        self.optional("STRATEGY").map(str::parse).transpose()
    }
}

fn split_key(line: &str) -> Option<(&'static str, &str)> {
    let (key, rest) = line.split_once(':')?;
    let key = DECISION_KEYS.iter().find(|k| **k == key.trim())?;
    Some((key, rest.trim()))
}

/// Splits a response into keyed fields. Lines that do not start with a
/// known key continue the previous field; text before the first key and
/// repeated keys are grammar violations. Code-fence lines are ignored.
pub fn parse_keyed(response: &str) -> Result<KeyedResponse, MalformedDecision> {
    let text = response.replace("\r\n", "\n");
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<&'static str> = None;

    for line in text.lines() {
        let line = line.trim_end();
        if line.trim_start().starts_with("```") {
            continue;
        }
        match split_key(line) {
            Some((key, value)) => {
                if fields.contains_key(key) {
                    return malformed(format!("{key} appears twice"));
                }
                fields.insert(key.to_string(), value.to_string());
                current = Some(key);
            }
            None => match current {
                Some(key) => {
                    let value = fields.get_mut(key).expect("current key is present");
                    if !line.trim().is_empty() {
                        if !value.is_empty() {
                            value.push('\n');
                        }
                        value.push_str(line.trim());
                    }
                }
                None if line.trim().is_empty() => {}
                None => return malformed(format!("unexpected text before the first key: `{line}`")),
            },
        }
    }
    if fields.is_empty() {
        return malformed("no KEY: value lines");
    }
    Ok(KeyedResponse { fields })
}

fn parse_id_list(value: &str) -> Result<Vec<String>, MalformedDecision> {
    let value = value.trim();
    let inner = if let Some(rest) = value.strip_prefix('[') {
        match rest.strip_suffix(']') {
            Some(inner) => inner,
            None => return malformed("COMPLETED list is missing its closing `]`"),
        }
    } else if value.eq_ignore_ascii_case("none") {
        ""
    } else {
        value
    };
    Ok(inner
        .split(',')
        .map(|id| id.trim().trim_matches(|c| c == '"' || c == '\'').trim())
        .filter(|id| !id.is_empty())
        .map(str::to_string)
        .collect())
}

/// Parsed speaking decision: plot assertions plus the utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionPayload {
    pub completed: Vec<String>,
    pub speaker: String,
    pub addressee: String,
    pub utterance: String,
    pub action: Option<String>,
    pub class: Option<InputClass>,
    pub strategy: Option<Strategy>,
}

/// Checks that a strategy accompanies exactly the off-plot classes.
pub(crate) fn check_strategy(
    class: Option<InputClass>,
    strategy: Option<Strategy>,
) -> Result<(), MalformedDecision> {
    match (class, strategy) {
        (None, Some(_)) => malformed("STRATEGY given without CLASS"),
        (Some(InputClass::InPlot), Some(_)) => malformed("InPlot input takes no STRATEGY"),
        (Some(InputClass::Daily | InputClass::Breaking), None) => {
            malformed("Daily and Breaking input need a STRATEGY")
        }
        _ => Ok(()),
    }
}

pub fn extract_structured_decision(response: &str) -> Result<DecisionPayload, MalformedDecision> {
    let keyed = parse_keyed(response)?;
    if keyed.get("COMPLETED").is_none() {
        return malformed("missing COMPLETED line");
    }
    let class = keyed.class()?;
    let strategy = keyed.strategy()?;
    check_strategy(class, strategy)?;
    Ok(DecisionPayload {
        completed: keyed.completed()?,
        speaker: keyed.require("SPEAKER")?.to_string(),
        addressee: keyed.require("TO")?.to_string(),
        utterance: keyed.require("SAY")?.to_string(),
        action: keyed.optional("ACTION").map(str::to_string),
        class,
        strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_decision() {
        let d = extract_structured_decision(
            "COMPLETED: [p2]\nSPEAKER: Mouri\nTO: player\nSAY: Stay close, kid.",
        )
        .unwrap();
        assert_eq!(d.completed, vec!["p2"]);
        assert_eq!(d.speaker, "Mouri");
        assert_eq!(d.addressee, "player");
        assert_eq!(d.utterance, "Stay close, kid.");
        assert_eq!(d.class, None);
    }

    #[test]
    fn empty_completion_list() {
        let d = extract_structured_decision("COMPLETED: []\nSPEAKER: A\nTO: all\nSAY: hi").unwrap();
        assert!(d.completed.is_empty());
    }

    #[test]
    fn missing_speaker_is_malformed() {
        assert!(extract_structured_decision("COMPLETED: []\nTO: all\nSAY: hi").is_err());
    }

    #[test]
    fn multi_line_say_and_optional_keys() {
        let d = extract_structured_decision(
            "COMPLETED: [p1, 'p3']\nSPEAKER: A\nTO: all\nCLASS: daily\nSTRATEGY: Ignore-Question\nSAY: line one\nline two\nACTION: shrugs",
        )
        .unwrap();
        assert_eq!(d.completed, vec!["p1", "p3"]);
        assert_eq!(d.utterance, "line one\nline two");
        assert_eq!(d.class, Some(InputClass::Daily));
        assert_eq!(d.strategy, Some(Strategy::IgnoreQuestion));
        assert_eq!(d.action.as_deref(), Some("shrugs"));
    }

    #[test]
    fn strategy_contract() {
        let base = "COMPLETED: []\nSPEAKER: A\nTO: all\nSAY: hi\n";
        assert!(extract_structured_decision(&format!("{base}CLASS: Daily")).is_err());
        assert!(extract_structured_decision(&format!("{base}CLASS: InPlot\nSTRATEGY: Avoid")).is_err());
        assert!(extract_structured_decision(&format!("{base}STRATEGY: Avoid")).is_err());
        assert!(extract_structured_decision(&format!("{base}CLASS: In-plot")).is_ok());
    }

    #[test]
    fn grammar_violations() {
        assert!(parse_keyed("Sure! Here you go\nSAY: hi").is_err());
        assert!(parse_keyed("SAY: a\nSAY: b").is_err());
        assert!(parse_keyed("").is_err());
        assert!(extract_structured_decision("COMPLETED: [p1\nSPEAKER: A\nTO: B\nSAY: c").is_err());
    }

    #[test]
    fn fences_and_crlf_are_tolerated() {
        let d = extract_structured_decision("```\r\nCOMPLETED: none\r\nSPEAKER: A\r\nTO: B\r\nSAY: c\r\n```")
            .unwrap();
        assert!(d.completed.is_empty());
        assert_eq!(d.utterance, "c");
    }
}
