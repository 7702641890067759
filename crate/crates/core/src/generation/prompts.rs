//! Prompt builders for the generation stages.
//!
//! Every prompt is a sequence of `## Section` blocks; model output is
//! requested under `### Section` headers so [`crate::llm::extract_tagged_block`]
//! can pull it apart.

use crate::llm::{CallRole, ChatRequest};
use crate::playbook::{Catalog, TechniqueSelection};

use super::story::Story;

pub const WRITER_SYSTEM: &str =
    "You are a playwright who writes stories for interactive drama, where the reader plays the protagonist.";
pub const CRITIC_SYSTEM: &str = "You are a drama critic who reviews stories for their use of narrative techniques.";
pub const JUDGE_SYSTEM: &str = "You are an impartial judge of interactive drama stories.";
pub const TRANSFORMER_SYSTEM: &str =
    "You convert finished stories into structured interactive drama scripts without adding new events.";

pub const OUTLINE: &str = "Plot Outline";
pub const CHARACTERS: &str = "Characters";
pub const COMPLETE_STORY: &str = "Complete Story";
pub const TECHNIQUE_EXPLANATION: &str = "Technique Explanation";
pub const TECHNIQUES_USED: &str = "Techniques Used";
pub const EFFECTIVENESS: &str = "Effectiveness";
pub const COMMENT: &str = "Comment";
pub const NEW_STORY: &str = "New Story";
pub const CHOICE: &str = "Choice";
pub const RATIONALE: &str = "Rationale";
pub const REFINED_STORY: &str = "Refined Story";
pub const SCRIPT: &str = "Script";

pub fn writer(catalog: &Catalog, premise: &str, selection: &TechniqueSelection) -> ChatRequest {
    let user = format!(
        "## Task\n\
         Write a dramatic story told from the protagonist's point of view, grown from the premise below. \
         In interactive drama the player becomes the protagonist and talks with the other characters, \
         so give them concrete people to meet.\n\n\
         ## Premise Paragraph\n{premise}\n\n\
         ## Dramatic Situation\n{situation}\n\n\
         ## Narrative Techniques\n{techniques}\n\n\
         ## Workflow\n\
         1. Follow the dramatic situation act by act and use every listed technique.\n\
         2. Introduce each main character other than the protagonist in about 100 words, then the protagonist briefly. \
         Every character must be a named individual.\n\
         3. Draft a plot outline of about 100 words.\n\
         4. Expand the outline into a complete story of about 500 words. \
         If you use multiple narratives, the protagonist may temporarily become another character. \
         Mark any flashback paragraph so it can stand on its own.\n\n\
         ## Output Format\n\
         ### {CHARACTERS}\n(one `Name: description` line per character)\n\
         ### {OUTLINE}\n\
         ### {COMPLETE_STORY}\n\
         ### {TECHNIQUE_EXPLANATION}\n(how each technique shows up in the story)\n",
        situation = catalog.situation_text(selection.situation),
        techniques = catalog.techniques_text(&selection.techniques),
    );
    ChatRequest::prompt(CallRole::Writer, WRITER_SYSTEM, user)
}

pub fn critic(catalog: &Catalog, story: &Story) -> ChatRequest {
    let user = format!(
        "## Task\n\
         Review the story below for its narrative techniques and suggest improvements.\n\n\
         ## Narrative Techniques\n{techniques}\n\n\
         ## Story\n{text}\n\n\
         ## Requirements\n\
         Decide which of the listed techniques the story actually uses (at most three). \
         Judge whether each one works: does the twist land, does a non-linear passage get its own scene. \
         Then say concretely how to improve the story.\n\n\
         ## Output Format\n\
         ### {TECHNIQUES_USED}\n(comma-separated technique names, or `none`)\n\
         ### {EFFECTIVENESS}\n\
         ### {COMMENT}\n",
        techniques = catalog.techniques_text(&story.selection.techniques),
        text = story.text(),
    );
    ChatRequest::prompt(CallRole::Critic, CRITIC_SYSTEM, user)
}

/// The comment is embedded verbatim.
pub fn reviser(story: &Story, comment: &str) -> ChatRequest {
    let user = format!(
        "## Task\n\
         Rewrite the story so that it answers the review comment.\n\n\
         ## Story\n{text}\n\n\
         ## Requirements\n\
         Study the comment first. You may change scenes or characters.\n\n\
         ## Comment\n{comment}\n\n\
         ## Output Format\n\
         ### {NEW_STORY}\n\
         ### Explanation\n(what changed and why it is better)\n",
        text = story.text(),
    );
    ChatRequest::prompt(CallRole::Reviser, WRITER_SYSTEM, user)
}

pub fn judge(premise: &str, candidates: &[Story]) -> ChatRequest {
    let mut user = format!(
        "## Task\n\
         Three stories were written from the same premise. Pick the one that would make the most \
         engaging interactive drama.\n\n\
         ## Premise Paragraph\n{premise}\n\n"
    );
    for (i, story) in candidates.iter().enumerate() {
        user.push_str(&format!("## Story {}\n{}\n\n", i + 1, story.text()));
    }
    user.push_str(&format!(
        "## Output Format\n\
         ### {CHOICE}\n(the number of the best story, 1 to {n})\n\
         ### {RATIONALE}\n",
        n = candidates.len()
    ));
    ChatRequest::prompt(CallRole::Judge, JUDGE_SYSTEM, user)
}

pub fn refiner(story: &Story) -> ChatRequest {
    let user = format!(
        "## Task\n\
         Refine the story below, moving from its broad strokes to finer detail.\n\n\
         ## Story\n{tagged}\n\
         ## Requirements\n\
         - Coherence: check how consecutive sentences connect and repair weak links.\n\
         - Detail: make vague moments specific; if there is suspense, draw it out.\n\
         - Keep every `[sN]` line, in the same order, with its tag. You may expand its text in place.\n\
         - New sentences go on their own line tagged `[+]`, between existing lines.\n\
         - Never delete or reorder a tagged sentence.\n\n\
         ## Output Format\n\
         ### Analysis\n\
         ### {REFINED_STORY}\n(one tagged sentence per line)\n",
        tagged = story.tagged_text(),
    );
    ChatRequest::prompt(CallRole::Refiner, WRITER_SYSTEM, user)
}

pub const SCRIPT_EXAMPLE: &str = r#"{
  "schema": "stagecraft-script/v1",
  "title": "...",
  "background": "...",
  "roster": [
    {"name": "Player Name", "description": "...", "is_player": true},
    {"name": "Other Name", "description": "..."}
  ],
  "scenes": [
    {
      "index": 1,
      "background": "...",
      "location": "...",
      "mode": "interactive",
      "is_flashback": false,
      "setups": {"Other Name": "what this character knows and wants in the scene"},
      "plots": [{"id": "s1p1", "description": "..."}]
    }
  ]
}"#;

pub fn transformer(story: &Story) -> ChatRequest {
    let user = format!(
        "## Task\n\
         Turn the story into an interactive drama script. Only restructure: every scene, setup and plot \
         must come from the story text.\n\n\
         ## Characters\n{characters}\n\n\
         ## Story\n{text}\n\n\
         ## Requirements\n\
         - Split the story into 3 to 5 scenes.\n\
         - Any flashback or flash-forward becomes its own scene with `\"is_flashback\": true`.\n\
         - The protagonist is the single roster entry with `\"is_player\": true`.\n\
         - Each scene lists the characters present in `setups` and an ordered plot chain in `plots`.\n\
         - Use `\"mode\": \"narrative\"` for scenes that mostly tell, `\"interactive\"` otherwise.\n\
         - Plot ids are unique within their scene.\n\n\
         ## Output Format\n\
         ### {SCRIPT}\n\
         ```json\n{SCRIPT_EXAMPLE}\n```\n",
        characters = if story.characters.trim().is_empty() {
            "(see story)"
        } else {
            story.characters.trim()
        },
        text = story.text(),
    );
    ChatRequest::prompt(CallRole::Transformer, TRANSFORMER_SYSTEM, user)
}

/// Follow-up message appended after a rejected transform.
pub fn transformer_repair(problem: &str) -> String {
    format!(
        "The script you returned cannot be used: {problem}\n\
         Return the corrected script under `### {SCRIPT}` as a single JSON object."
    )
}

/// Follow-up message appended after a refinement that broke sentence tags.
pub fn refiner_repair(problem: &str) -> String {
    format!(
        "Your refined story broke the tagging rules: {problem}\n\
         Return it again under `### {REFINED_STORY}`, keeping every original `[sN]` line in order."
    )
}
