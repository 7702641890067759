use std::collections::HashSet;

use serde_json::error::Category;

use super::model::{DramaScript, SCRIPT_SCHEMA};
use super::ScriptError;

/// Parses and validates a `stagecraft-script/v1` JSON document.
pub fn parse_script(document: &str) -> Result<DramaScript, ScriptError> {
    let script: DramaScript = serde_json::from_str(document).map_err(|e| match e.classify() {
        Category::Data => ScriptError::Schema(e.to_string()),
        _ => ScriptError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    })?;
    validate_script(&script)?;
    Ok(script)
}

pub fn serialize_script(script: &DramaScript) -> String {
    let mut text = serde_json::to_string_pretty(script).expect("script serializes");
    text.push('\n');
    text
}

/// Structural invariants every script must satisfy.
pub fn validate_script(script: &DramaScript) -> Result<(), ScriptError> {
    let schema = |msg: String| Err(ScriptError::Schema(msg));

    if script.schema != SCRIPT_SCHEMA {
        return schema(format!(
            "unsupported schema `{}` (expected `{SCRIPT_SCHEMA}`)",
            script.schema
        ));
    }
    if script.scenes.is_empty() {
        return schema("script has no scenes".into());
    }

    let mut names = HashSet::new();
    for character in &script.roster {
        if character.name.trim().is_empty() {
            return schema("roster entry with empty name".into());
        }
        if !names.insert(character.name.as_str()) {
            return schema(format!("duplicate character name `{}`", character.name));
        }
    }
    match script.roster.iter().filter(|c| c.is_player).count() {
        0 => return schema("no character is marked as the player (is_player)".into()),
        1 => {}
        n => return schema(format!("{n} characters are marked as the player; expected one")),
    }

    for (position, scene) in script.scenes.iter().enumerate() {
        let label = position + 1;
        if scene.index as usize != label {
            return schema(format!(
                "scene at position {label} has index {} (indices are 1-based and sequential)",
                scene.index
            ));
        }
        for name in scene.setups.keys() {
            if !names.contains(name.as_str()) {
                return schema(format!(
                    "scene {label} setup names `{name}`, who is not in the roster"
                ));
            }
        }
        if scene.plot_chain.is_empty() {
            return schema(format!("scene {label} has an empty plot chain"));
        }
        let mut ids = HashSet::new();
        for plot in scene.plot_chain.iter() {
            if plot.id.trim().is_empty() {
                return schema(format!("scene {label} has a plot with an empty id"));
            }
            if !ids.insert(plot.id.as_str()) {
                return schema(format!("scene {label} repeats plot id `{}`", plot.id));
            }
            if plot.description.trim().is_empty() {
                return schema(format!("plot `{}` in scene {label} has no description", plot.id));
            }
            if let Some(owner) = &plot.owner {
                let in_scene = scene.setups.contains_key(owner)
                    || script.player().is_some_and(|p| &p.name == owner);
                if !in_scene {
                    return schema(format!(
                        "plot `{}` in scene {label} is owned by `{owner}`, who is not in the scene",
                        plot.id
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Generated scripts additionally carry 3 to 5 scenes.
pub fn validate_generated(script: &DramaScript) -> Result<(), ScriptError> {
    validate_script(script)?;
    let n = script.scenes.len();
    if !(3..=5).contains(&n) {
        return Err(ScriptError::Schema(format!(
            "generated scripts need 3 to 5 scenes, found {n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc() -> serde_json::Value {
        json!({
            "title": "T",
            "background": "B",
            "roster": [
                {"name": "Pip", "description": "the player", "is_player": true},
                {"name": "Ada", "description": "a clerk", "is_player": false}
            ],
            "scenes": [{
                "index": 1,
                "background": "bg",
                "location": "hall",
                "mode": "narrative",
                "is_flashback": false,
                "setups": {"Pip": "", "Ada": "nervous"},
                "plots": [{"id": "p1", "description": "Ada greets Pip.", "owner": "Ada"}]
            }]
        })
    }

    #[test]
    fn parses_minimal_document() {
        let script = parse_script(&doc().to_string()).unwrap();
        assert_eq!(script.scenes.len(), 1);
        assert_eq!(script.player().unwrap().name, "Pip");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_script("{\n  \"title\": ,\n}").unwrap_err();
        match err {
            ScriptError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_is_schema_error() {
        let mut d = doc();
        d.as_object_mut().unwrap().remove("background");
        assert!(matches!(parse_script(&d.to_string()), Err(ScriptError::Schema(_))));
    }

    #[test]
    fn missing_player_marker() {
        let mut d = doc();
        d["roster"][0].as_object_mut().unwrap().remove("is_player");
        let err = parse_script(&d.to_string()).unwrap_err();
        assert!(matches!(err, ScriptError::Schema(ref m) if m.contains("player")), "{err}");
    }

    #[test]
    fn two_players_rejected() {
        let mut d = doc();
        d["roster"][1]["is_player"] = json!(true);
        assert!(matches!(parse_script(&d.to_string()), Err(ScriptError::Schema(_))));
    }

    #[test]
    fn unknown_setup_character_is_named() {
        let mut d = doc();
        d["scenes"][0]["setups"]["Ghost"] = json!("boo");
        let err = parse_script(&d.to_string()).unwrap_err();
        assert!(err.to_string().contains("Ghost"), "{err}");
    }

    #[test]
    fn empty_chain_rejected() {
        let mut d = doc();
        d["scenes"][0]["plots"] = json!([]);
        assert!(matches!(parse_script(&d.to_string()), Err(ScriptError::Schema(_))));
    }

    #[test]
    fn owner_must_be_in_scene() {
        let mut d = doc();
        d["scenes"][0]["plots"][0]["owner"] = json!("Nobody");
        assert!(matches!(parse_script(&d.to_string()), Err(ScriptError::Schema(_))));
    }

    #[test]
    fn generated_scripts_need_three_scenes() {
        let script = parse_script(&doc().to_string()).unwrap();
        assert!(validate_generated(&script).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let script = parse_script(&doc().to_string()).unwrap();
        let again = parse_script(&serialize_script(&script)).unwrap();
        assert_eq!(script, again);
    }
}
