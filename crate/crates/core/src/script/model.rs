use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Schema tag written into every serialized script.
pub const SCRIPT_SCHEMA: &str = "stagecraft-script/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub is_player: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotOrigin {
    #[default]
    Scripted,
    Reflected,
}

impl PlotOrigin {
    fn is_scripted(&self) -> bool {
        matches!(self, PlotOrigin::Scripted)
    }
}

/// One objective in a scene's plot chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plot {
    pub id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    #[serde(default, skip_serializing_if = "PlotOrigin::is_scripted")]
    pub origin: PlotOrigin,
}

impl Plot {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            completed: false,
            owner: None,
            origin: PlotOrigin::Scripted,
        }
    }

    pub fn completed(mut self, completed: bool) -> Self {
        self.completed = completed;
        self
    }

    pub fn owned_by(mut self, owner: impl Into<String>) -> Self {
        self.owner = Some(owner.into());
        self
    }

    pub fn reflected(mut self) -> Self {
        self.origin = PlotOrigin::Reflected;
        self
    }
}

/// Ordered plot objectives of a scene, tagged complete or incomplete.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlotChain {
    pub plots: Vec<Plot>,
}

impl PlotChain {
    pub fn new(plots: Vec<Plot>) -> Self {
        Self { plots }
    }

    pub fn len(&self) -> usize {
        self.plots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plots.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Plot> {
        self.plots.iter().find(|p| p.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Plot> {
        self.plots.iter()
    }

    pub fn completed_ids(&self) -> impl Iterator<Item = &str> {
        self.plots
            .iter()
            .filter(|p| p.completed)
            .map(|p| p.id.as_str())
    }

    /// First id of the form `{prefix}{n}` not already used in the chain.
    pub fn fresh_id(&self, prefix: &str) -> String {
        (1..)
            .map(|n| format!("{prefix}{n}"))
            .find(|candidate| self.get(candidate).is_none())
            .expect("unbounded id space")
    }
}

impl FromIterator<Plot> for PlotChain {
    fn from_iter<T: IntoIterator<Item = Plot>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneMode {
    Narrative,
    #[default]
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub index: u32,
    pub background: String,
    pub location: String,
    #[serde(default)]
    pub mode: SceneMode,
    #[serde(default)]
    pub is_flashback: bool,
    /// Character name to scene-specific thoughts and motivation.
    #[serde(default)]
    pub setups: BTreeMap<String, String>,
    #[serde(rename = "plots")]
    pub plot_chain: PlotChain,
}

impl Scene {
    /// Non-player characters present in this scene, in roster order.
    pub fn present_npcs<'a>(&'a self, script: &'a DramaScript) -> Vec<&'a CharacterProfile> {
        script
            .roster
            .iter()
            .filter(|c| !c.is_player && self.setups.contains_key(&c.name))
            .collect()
    }

    pub fn is_present(&self, name: &str) -> bool {
        self.setups.contains_key(name)
    }
}

/// A complete machine-readable drama script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramaScript {
    #[serde(default = "default_schema", rename = "schema")]
    pub schema: String,
    pub title: String,
    pub background: String,
    pub roster: Vec<CharacterProfile>,
    pub scenes: Vec<Scene>,
}

fn default_schema() -> String {
    SCRIPT_SCHEMA.to_string()
}

impl DramaScript {
    pub fn player(&self) -> Option<&CharacterProfile> {
        self.roster.iter().find(|c| c.is_player)
    }

    pub fn character(&self, name: &str) -> Option<&CharacterProfile> {
        self.roster.iter().find(|c| c.name == name)
    }

    /// Every plot description across all scenes.
    pub fn all_plot_descriptions(&self) -> impl Iterator<Item = &str> {
        self.scenes
            .iter()
            .flat_map(|s| s.plot_chain.iter().map(|p| p.description.as_str()))
    }
}
