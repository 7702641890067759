//! Catalogs of dramatic situations and narrative techniques, and the
//! per-run sampling of technique selections.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw bytes of the bundled catalog file.
pub const BUNDLED_CATALOG: &str = include_str!("../data/playbook/catalog.json");

/// Number of candidate stories drafted per run.
pub const ITERATIONS: usize = 3;
/// Narrative techniques applied per candidate.
pub const TECHNIQUES_PER_STORY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SituationId {
    Love,
    Phoenix,
    Cinderella,
    LoveTriangle,
    Revenge,
    Family,
    Reunion,
    Savior,
}

impl SituationId {
    pub const ALL: [SituationId; 8] = [
        SituationId::Love,
        SituationId::Phoenix,
        SituationId::Cinderella,
        SituationId::LoveTriangle,
        SituationId::Revenge,
        SituationId::Family,
        SituationId::Reunion,
        SituationId::Savior,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechniqueId {
    Suspense,
    Twist,
    NonLinear,
    MultipleNarrative,
    Irony,
    Symbolism,
}

impl TechniqueId {
    pub const ALL: [TechniqueId; 6] = [
        TechniqueId::Suspense,
        TechniqueId::Twist,
        TechniqueId::NonLinear,
        TechniqueId::MultipleNarrative,
        TechniqueId::Irony,
        TechniqueId::Symbolism,
    ];

    /// Loose name matching for technique mentions in model output.
    pub fn from_mention(text: &str) -> Option<TechniqueId> {
        let norm: String = text
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let id = match norm.as_str() {
            "suspense" => TechniqueId::Suspense,
            "twist" | "twists" | "plottwist" => TechniqueId::Twist,
            "nonlinear" | "nonlinearnarrative" | "nonlinearstorytelling" => TechniqueId::NonLinear,
            "multiple" | "multiplenarrative" | "multiplenarratives" | "multipleperspectives" => {
                TechniqueId::MultipleNarrative
            }
            "irony" | "ironic" => TechniqueId::Irony,
            "symbolism" | "symbol" | "symbolic" => TechniqueId::Symbolism,
            _ => return None,
        };
        Some(id)
    }

    /// Techniques named anywhere in free text, in catalog order.
    pub fn mentioned_in(text: &str) -> Vec<TechniqueId> {
        let lower = text.to_lowercase().replace(['-', '_'], " ");
        let stems: [(TechniqueId, &[&str]); 6] = [
            (TechniqueId::Suspense, &["suspense"]),
            (TechniqueId::Twist, &["twist"]),
            (TechniqueId::NonLinear, &["non linear", "nonlinear", "flashback", "flash forward"]),
            (TechniqueId::MultipleNarrative, &["multiple narrative", "multiple perspective"]),
            (TechniqueId::Irony, &["irony", "ironic"]),
            (TechniqueId::Symbolism, &["symbolism", "symbolic"]),
        ];
        stems
            .iter()
            .filter(|(_, words)| words.iter().any(|w| lower.contains(w)))
            .map(|(id, _)| *id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramaticSituation {
    pub id: SituationId,
    pub name: String,
    /// Setup, confrontation and resolution.
    pub acts: [String; 3],
    pub exemplar: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeTechnique {
    pub id: TechniqueId,
    pub name: String,
    pub description: String,
    /// Wording used inside generation prompts.
    pub prompt_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechniqueSelection {
    pub situation: SituationId,
    /// Exactly three distinct techniques, in catalog order.
    pub techniques: Vec<TechniqueId>,
    /// 1-based iteration this selection drives.
    pub iteration: u8,
}

impl TechniqueSelection {
    pub fn includes(&self, technique: TechniqueId) -> bool {
        self.techniques.contains(&technique)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog file: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub situations: Vec<DramaticSituation>,
    pub techniques: Vec<NarrativeTechnique>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let catalog: Catalog = serde_json::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The catalog shipped with the crate.
    pub fn bundled() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_json(BUNDLED_CATALOG).expect("bundled catalog is valid"))
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |m: String| Err(CatalogError::Invalid(m));
        if self.situations.len() != SituationId::ALL.len() {
            return invalid(format!("expected 8 situations, found {}", self.situations.len()));
        }
        if self.techniques.len() != TechniqueId::ALL.len() {
            return invalid(format!("expected 6 techniques, found {}", self.techniques.len()));
        }
        for id in SituationId::ALL {
            if self.situations.iter().filter(|s| s.id == id).count() != 1 {
                return invalid(format!("situation {id:?} must appear exactly once"));
            }
        }
        for id in TechniqueId::ALL {
            if self.techniques.iter().filter(|t| t.id == id).count() != 1 {
                return invalid(format!("technique {id:?} must appear exactly once"));
            }
        }
        Ok(())
    }

    pub fn situation(&self, id: SituationId) -> &DramaticSituation {
        self.situations
            .iter()
            .find(|s| s.id == id)
            .expect("validated catalog holds every situation")
    }

    pub fn technique(&self, id: TechniqueId) -> &NarrativeTechnique {
        self.techniques
            .iter()
            .find(|t| t.id == id)
            .expect("validated catalog holds every technique")
    }

    /// `{situation}` fragment of the writer prompt.
    pub fn situation_text(&self, id: SituationId) -> String {
        let s = self.situation(id);
        let mut out = format!("{}:\n", s.name);
        for act in &s.acts {
            out.push_str("- ");
            out.push_str(act);
            out.push('\n');
        }
        out
    }

    /// `{techniques}` fragment of the writer and critic prompts.
    pub fn techniques_text(&self, ids: &[TechniqueId]) -> String {
        ids.iter()
            .map(|id| {
                let t = self.technique(*id);
                format!("{}: {}\n", t.name, t.prompt_description)
            })
            .collect()
    }

    /// Both catalog fragments for a selection.
    pub fn prompt_text(&self, selection: &TechniqueSelection) -> String {
        format!(
            "Dramatic Situation:\n{}\nNarrative Techniques:\n{}",
            self.situation_text(selection.situation),
            self.techniques_text(&selection.techniques)
        )
    }
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Dramatic situations:")?;
        for s in &self.situations {
            writeln!(f, "  {} (\"{}\")", s.name, s.exemplar)?;
            for act in &s.acts {
                writeln!(f, "    - {act}")?;
            }
        }
        writeln!(f, "Narrative techniques:")?;
        for t in &self.techniques {
            writeln!(f, "  {}: {}", t.name, t.description)?;
        }
        Ok(())
    }
}

/// Renders catalog fragments for `selection` from the bundled catalog.
pub fn catalog_prompt_text(selection: &TechniqueSelection) -> String {
    Catalog::bundled().prompt_text(selection)
}

/// Draws three selections: pairwise-distinct situations, and technique
/// triples that differ as sets. Deterministic per seed.
pub fn sample_selections(rng_seed: u64) -> Vec<TechniqueSelection> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let situations = index::sample(&mut rng, SituationId::ALL.len(), ITERATIONS);

    let mut chosen: Vec<Vec<TechniqueId>> = Vec::with_capacity(ITERATIONS);
    while chosen.len() < ITERATIONS {
        let mut picks: Vec<usize> =
            index::sample(&mut rng, TechniqueId::ALL.len(), TECHNIQUES_PER_STORY).into_vec();
        picks.sort_unstable();
        let set: Vec<TechniqueId> = picks.into_iter().map(|i| TechniqueId::ALL[i]).collect();
        if !chosen.contains(&set) {
            chosen.push(set);
        }
    }

    situations
        .iter()
        .zip(chosen)
        .enumerate()
        .map(|(i, (s, techniques))| TechniqueSelection {
            situation: SituationId::ALL[s],
            techniques,
            iteration: (i + 1) as u8,
        })
        .collect()
}
