//! A deterministic stand-in model that answers every call role by reading
//! the prompt it is given. Used for offline demos, CI and fixtures.

use std::collections::HashSet;
use std::sync::Arc;

use crate::generation::{prompts as gen_prompts, split_sentences};
use crate::llm::{sections, CallRole, ChatRequest, MockProvider, MockReply, MockStub, Role};
use crate::playbook::TechniqueId;
use crate::script::{
    serialize_script, CharacterProfile, DramaScript, Plot, PlotChain, Scene, SceneMode, SCRIPT_SCHEMA,
};

/// Marker appended by autopilot reflections.
pub const REFLECTION_MARK: &str = "(shaped by the player's questions)";

const CAST: [(&str, &str); 6] = [
    ("Mara Quill", "a retired archivist who keeps everyone's secrets and few of her own"),
    ("Tobias Venn", "a charming courier who always arrives a little too early"),
    ("Elsie Harrow", "a sharp-eyed nurse who notices what others try to hide"),
    ("Rafael Ortiz", "an out-of-work engineer carrying an old grudge"),
    ("Nadia Roux", "a journalist chasing the story that ended her career"),
    ("Callum Reyes", "a quiet caretaker who knows every locked door in town"),
];
const PROTAGONIST: &str = "Avery Lane";
const LOCATIONS: [&str; 5] = ["the waiting hall", "the archive room", "the platform", "the old office", "the rooftop"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Autopilot {
    /// Scene moment by which every plot of a scene is reported complete.
    pub pace: u32,
}

impl Default for Autopilot {
    fn default() -> Self {
        Self { pace: 10 }
    }
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

struct Prompt {
    sections: Vec<(String, String)>,
}

impl Prompt {
    fn of(request: &ChatRequest) -> Self {
        let first_user = request
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        Self {
            sections: sections(first_user),
        }
    }

    fn get(&self, title: &str) -> &str {
        self.sections
            .iter()
            .find(|(t, _)| t.eq_ignore_ascii_case(title))
            .map(|(_, b)| b.as_str())
            .unwrap_or("")
    }

    /// `Name: rest` lines, optionally bulleted.
    fn named_lines(&self, title: &str) -> Vec<(String, String)> {
        self.get(title)
            .lines()
            .filter_map(|l| {
                let l = l.trim().trim_start_matches("- ");
                let (name, rest) = l.split_once(':')?;
                Some((name.trim().to_string(), rest.trim().to_string()))
            })
            .filter(|(n, _)| !n.is_empty())
            .collect()
    }

    fn moment(&self) -> u32 {
        self.get("Moment")
            .rsplit(':')
            .next()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(1)
    }

    fn chain(&self) -> Vec<(bool, String, String)> {
        self.get("Plot Chain")
            .lines()
            .filter_map(|l| {
                let rest = l.trim().strip_prefix('[')?;
                let (mark, rest) = rest.split_once(']')?;
                let (id, desc) = rest.split_once(':')?;
                Some((mark.trim() == "x", id.trim().to_string(), desc.trim().to_string()))
            })
            .collect()
    }

    /// Player name and utterance; silence yields an empty utterance.
    fn player_input(&self) -> (String, String) {
        let raw = self.get("Player Input");
        let (name, text) = raw.split_once(':').unwrap_or(("player", raw));
        let text = text.trim();
        let text = if text == crate::runtime::prompts::SILENCE { "" } else { text };
        (name.trim().to_string(), text.to_string())
    }
}

fn content_words(text: &str, min: usize) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= min)
        .map(str::to_lowercase)
        .collect()
}

impl Autopilot {
    pub fn new(pace: u32) -> Self {
        Self { pace: pace.max(1) }
    }

    pub fn stub(self) -> MockStub {
        Arc::new(move |request: &ChatRequest, _| MockReply::Text(self.respond(request)))
    }

    pub fn into_provider(self) -> MockProvider {
        MockProvider::from_script(Default::default())
            .with_stub(self.stub())
            .with_tag("autopilot")
    }

    pub fn respond(&self, request: &ChatRequest) -> String {
        let p = Prompt::of(request);
        match request.role {
            CallRole::Writer => writer(&p),
            CallRole::Critic => critic(&p),
            CallRole::Reviser => reviser(&p),
            CallRole::Judge => judge(&p),
            CallRole::Refiner => refiner(&p),
            CallRole::Transformer => transformer(&p),
            CallRole::Director => self.director(&p, false),
            CallRole::Global => self.director(&p, true),
            CallRole::Actor => actor(&p),
            CallRole::Reflection => reflection(&p),
            CallRole::Classifier => {
                let (_, input) = p.player_input();
                format!("CLASS: {}", classify(&p, &input))
            }
            CallRole::Player => player(&p),
        }
    }

    fn director(&self, p: &Prompt, speaks: bool) -> String {
        let chain = p.chain();
        let moment = p.moment();
        let n = chain.len().max(1) as u32;
        let completed: Vec<&str> = chain
            .iter()
            .enumerate()
            .filter(|(i, (done, _, _))| !done && (*i as u32 + 1) * self.pace <= moment * n)
            .map(|(_, (_, id, _))| id.as_str())
            .collect();
        let (player, input) = p.player_input();
        let class = classify(p, &input);
        let strategy = strategy_for(class, &input);
        let cast: Vec<String> = p.named_lines("Characters Present").into_iter().map(|(n, _)| n).collect();
        let lower = input.to_lowercase();
        let speaker = cast
            .iter()
            .find(|name| name.split_whitespace().any(|part| lower.contains(&part.to_lowercase())))
            .or_else(|| cast.get((moment as usize + fnv(&input) as usize) % cast.len().max(1)))
            .cloned()
            .unwrap_or_else(|| "Narrator".into());

        let mut out = format!("COMPLETED: [{}]\nCLASS: {class}\n", completed.join(", "));
        if let Some(s) = strategy {
            out.push_str(&format!("STRATEGY: {s}\n"));
        }
        out.push_str(&format!("SPEAKER: {speaker}\n"));
        if speaks {
            out.push_str(&format!("TO: {player}\nSAY: {}\n", line_for(&speaker, &player, strategy, moment)));
        } else {
            let how = match strategy {
                None => "answer the question and keep the scene moving".to_string(),
                Some(s) => format!("respond with the {s} strategy and steer back to the matter at hand"),
            };
            out.push_str(&format!("MOTIVATION: Turn to {player} and {how}.\n"));
        }
        out
    }
}

fn classify(p: &Prompt, input: &str) -> &'static str {
    if input.trim().is_empty() {
        return "Breaking";
    }
    let mut vocab = content_words(p.get("Scene"), 5);
    for (done, _, desc) in p.chain() {
        if !done {
            vocab.extend(content_words(&desc, 4));
        }
    }
    let said = content_words(input, 4);
    if said.iter().any(|w| vocab.contains(w)) {
        "InPlot"
    } else if input.contains('?') {
        "Daily"
    } else {
        "Breaking"
    }
}

fn strategy_for(class: &str, input: &str) -> Option<&'static str> {
    match class {
        "InPlot" => None,
        "Daily" if input.contains('?') => Some("Ignore-Question"),
        "Daily" => Some("Associate"),
        _ => Some("Avoid"),
    }
}

fn line_for(speaker: &str, player: &str, strategy: Option<&str>, moment: u32) -> String {
    let first = player.split_whitespace().next().unwrap_or(player);
    let _ = speaker;
    match strategy {
        None => [
            format!("Listen, {first}. Something here does not add up, and I intend to find out what."),
            format!("Keep your voice down, {first}. Not everyone in this room is who they claim to be."),
            format!("You noticed it too, {first}? Then we had better look closer."),
        ][moment as usize % 3]
            .clone(),
        Some("Avoid") => format!("That can wait, {first}. Right now we have bigger problems."),
        Some("Ignore-Question") => format!("Never mind that, {first}. Tell me what you saw a moment ago."),
        Some(_) => format!("Funny you say that, {first}. It reminds me of what happened here earlier."),
    }
}

fn actor(p: &Prompt) -> String {
    let you = p.get("You Are");
    let name = you.split(':').next().unwrap_or("Someone").trim().to_string();
    let direction = p.get("Direction");
    let strategy = direction
        .lines()
        .find_map(|l| l.strip_prefix("Reply strategy:"))
        .map(str::trim);
    let (player, _) = p.player_input();
    let strategy = match strategy {
        Some("Avoid") => Some("Avoid"),
        Some("Ignore-Question") => Some("Ignore-Question"),
        Some(_) => Some("Associate"),
        None => None,
    };
    let moment = fnv(p.get("What Has Been Said")) as u32;
    format!("TO: {player}\nSAY: {}\n", line_for(&name, &player, strategy, moment))
}

fn reflection(p: &Prompt) -> String {
    let chain = p.chain();
    let already = chain.iter().any(|(_, _, d)| d.ends_with(REFLECTION_MARK));
    let target = if already {
        None
    } else {
        chain.iter().rposition(|(done, _, _)| !done)
    };
    let mut out = String::from("PLOTS:\n");
    for (i, (done, id, desc)) in chain.iter().enumerate() {
        let desc = if Some(i) == target {
            format!("{desc} {REFLECTION_MARK}")
        } else {
            desc.clone()
        };
        out.push_str(&format!("[{}] {id}: {desc}\n", if *done { "x" } else { " " }));
    }
    out
}

fn player(p: &Prompt) -> String {
    let persona = p.get("Persona").split(':').next().unwrap_or("").trim().to_lowercase();
    let turn = p.get("Turn").rsplit(':').next().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(1);
    let cast: Vec<String> = p.named_lines("Characters Present").into_iter().map(|(n, _)| n).collect();
    let npc = cast.get(turn % cast.len().max(1)).cloned().unwrap_or_else(|| "everyone".into());
    let first = npc.split_whitespace().next().unwrap_or(&npc).to_string();
    let scene_words: Vec<String> = {
        let mut w: Vec<String> = content_words(p.get("Scene"), 5).into_iter().collect();
        w.sort();
        w
    };
    let topic = scene_words
        .get(turn % scene_words.len().max(1))
        .cloned()
        .unwrap_or_else(|| "situation".into());

    let pattern: &[&str] = match persona.as_str() {
        "troublemaker" => &["break"],
        "grumpy guy" | "demanding" => &["plot", "break", "plot", "daily"],
        "fan girl" | "strolling lady" | "heartbroken one" => &["daily", "plot"],
        _ => &["plot", "plot", "daily", "plot", "break"],
    };
    let line = match pattern[(turn - 1) % pattern.len()] {
        "plot" => format!("{first}, what do you make of the {topic}?"),
        "daily" => format!("{first}, what's your favorite food?"),
        _ => "I climb onto the luggage rack and start juggling teacups.".to_string(),
    };
    format!("SAY: {line}\n")
}

fn selected_techniques(p: &Prompt) -> Vec<TechniqueId> {
    p.get("Narrative Techniques")
        .lines()
        .filter_map(|l| TechniqueId::from_mention(l.split(':').next().unwrap_or("")))
        .collect()
}

fn writer(p: &Prompt) -> String {
    let premise = p.get("Premise Paragraph");
    let situation = p.get("Dramatic Situation").lines().next().unwrap_or("").trim_end_matches(':').to_string();
    let techniques = selected_techniques(p);
    let h = fnv(&format!("{premise}|{situation}|{techniques:?}")) as usize;
    let b = CAST[h % CAST.len()];
    let c = CAST[(h / 7 + 1 + h % CAST.len()) % CAST.len()];
    let c = if c.0 == b.0 { CAST[(h + 1) % CAST.len()] } else { c };
    let (bn, cn) = (b.0, c.0);
    let place = LOCATIONS[h % LOCATIONS.len()];

    let mut opening = vec![
        format!("{PROTAGONIST} arrives at {place} just as the lights begin to fail."),
        format!("{bn} is already there, pretending to read a timetable."),
    ];
    let mut middle = vec![format!("{cn} insists that nothing unusual happened tonight.")];
    let mut flashback = Vec::new();
    for t in &techniques {
        match t {
            TechniqueId::Suspense => {
                opening.push(format!("Nobody will say who sent the unsigned letter that brought {PROTAGONIST} here."))
            }
            TechniqueId::Twist => middle.push(format!("Then {bn} reveals that {cn} wrote the letter.")),
            TechniqueId::NonLinear => {
                flashback.push(format!("Flashback: years earlier, {bn} and {cn} made a promise at {place}."));
                flashback.push(format!("They swore never to speak of the fire again."));
            }
            TechniqueId::MultipleNarrative => {
                middle.push(format!("For a while the story follows {cn}, who watches {PROTAGONIST} from the doorway."))
            }
            TechniqueId::Irony => middle.push(format!("{cn} praises {PROTAGONIST}'s honesty while hiding the truth.")),
            TechniqueId::Symbolism => {
                opening.push("A cracked lantern hangs above the door and flickers whenever someone lies.".into())
            }
        }
    }
    let ending = vec![
        format!("{PROTAGONIST} confronts them both with the letter."),
        format!("By morning the three of them understand what the promise cost."),
    ];
    let mut paragraphs = vec![opening.join(" ")];
    if !flashback.is_empty() {
        paragraphs.push(flashback.join(" "));
    }
    paragraphs.push(middle.join(" "));
    paragraphs.push(ending.join(" "));

    format!(
        "### {chars}\n{PROTAGONIST}: the protagonist, a newcomer pulled into the affair.\n{bn}: {bd}.\n{cn}: {cd}.\n\n\
         ### {outline}\n{PROTAGONIST} follows an unsigned letter to {place}, meets {bn} and {cn}, and uncovers an old promise.\n\n\
         ### {story}\n{body}\n\n\
         ### {expl}\nEach selected technique appears in at least one sentence.\n",
        chars = gen_prompts::CHARACTERS,
        outline = gen_prompts::OUTLINE,
        story = gen_prompts::COMPLETE_STORY,
        expl = gen_prompts::TECHNIQUE_EXPLANATION,
        bd = b.1,
        cd = c.1,
        body = paragraphs.join("\n\n"),
    )
}

fn critic(p: &Prompt) -> String {
    let names: Vec<&str> = p
        .get("Narrative Techniques")
        .lines()
        .filter_map(|l| l.split(':').next())
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .collect();
    format!(
        "### {used}\n{}\n### {eff}\nThe techniques are present but the middle section moves quickly.\n\
         ### {comment}\nSlow down the confrontation and let the reveal land before the ending.\n",
        names.join(", "),
        used = gen_prompts::TECHNIQUES_USED,
        eff = gen_prompts::EFFECTIVENESS,
        comment = gen_prompts::COMMENT,
    )
}

fn reviser(p: &Prompt) -> String {
    let story = p.get("Story");
    format!(
        "### {new}\n{story} For a long moment nobody moves.\n\n### Explanation\nThe reveal now has room to breathe.\n",
        new = gen_prompts::NEW_STORY
    )
}

fn judge(p: &Prompt) -> String {
    let best = (1..=3)
        .map(|i| (i, p.get(&format!("Story {i}")).split_whitespace().count()))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(1, |(i, _)| i);
    format!(
        "### {choice}\n{best}\n### {rationale}\nStory {best} gives the player the most to do.\n",
        choice = gen_prompts::CHOICE,
        rationale = gen_prompts::RATIONALE
    )
}

const DETAILS: [&str; 3] = [
    "Rain streaks the windows and the clock above the door has stopped.",
    "Somewhere below, a dog barks twice and falls silent.",
    "The air smells of wet coal and damp wool.",
];

fn refiner(p: &Prompt) -> String {
    let story = p.get("Story");
    let detail = DETAILS.iter().find(|d| !story.contains(*d)).copied();
    let tagged: Vec<&str> = p.get("Story").lines().filter(|l| l.trim_start().starts_with("[s")).collect();
    let mut out = format!("### Analysis\nThe opening needs one more concrete detail.\n### {}\n", gen_prompts::REFINED_STORY);
    for (i, line) in tagged.iter().enumerate() {
        out.push_str(line.trim());
        out.push('\n');
        if let (0, Some(detail)) = (i, detail) {
            out.push_str("[+] ");
            out.push_str(detail);
            out.push('\n');
        }
    }
    out
}

fn transformer(p: &Prompt) -> String {
    let roster_lines = p.named_lines("Characters");
    let mut roster: Vec<CharacterProfile> = roster_lines
        .iter()
        .map(|(name, desc)| CharacterProfile {
            name: name.clone(),
            description: desc.clone(),
            is_player: false,
        })
        .collect();
    let player_idx = roster
        .iter()
        .position(|c| c.description.to_lowercase().contains("protagonist"))
        .unwrap_or(0);
    if roster.is_empty() {
        roster.push(CharacterProfile {
            name: PROTAGONIST.into(),
            description: "the protagonist".into(),
            is_player: true,
        });
    }
    roster[player_idx].is_player = true;
    if roster.len() < 2 {
        roster.push(CharacterProfile {
            name: CAST[0].0.into(),
            description: CAST[0].1.into(),
            is_player: false,
        });
    }
    let npcs: Vec<String> = roster.iter().filter(|c| !c.is_player).map(|c| c.name.clone()).collect();

    let sentences = split_sentences(p.get("Story"));
    let is_flash = |t: &str| {
        let l = t.to_lowercase();
        l.contains("flashback") || l.contains("years earlier") || l.contains("flash-forward")
    };
    let flash: Vec<String> = sentences.iter().filter(|s| is_flash(&s.text)).map(|s| s.text.clone()).collect();
    let rest: Vec<String> = sentences.iter().filter(|s| !is_flash(&s.text)).map(|s| s.text.clone()).collect();
    let third = rest.len().div_ceil(3).max(1);
    let mut chunks: Vec<(Vec<String>, bool)> = rest.chunks(third).map(|c| (c.to_vec(), false)).collect();
    while chunks.len() < 3 {
        chunks.push((vec![format!("{} waits for what comes next.", npcs[0])], false));
    }
    if !flash.is_empty() {
        chunks.insert(1, (flash, true));
    }

    let scenes: Vec<Scene> = chunks
        .iter()
        .enumerate()
        .map(|(i, (lines, flashback))| Scene {
            index: i as u32 + 1,
            background: lines[0].clone(),
            location: LOCATIONS[i % LOCATIONS.len()].to_string(),
            mode: if i == 0 { SceneMode::Narrative } else { SceneMode::Interactive },
            is_flashback: *flashback,
            setups: npcs
                .iter()
                .map(|n| (n.clone(), format!("{n} is here and watches the others closely.")))
                .collect(),
            plot_chain: lines
                .iter()
                .take(3)
                .enumerate()
                .map(|(j, l)| Plot::new(format!("s{}p{}", i + 1, j + 1), l.clone()))
                .collect::<PlotChain>(),
        })
        .collect();
    let script = DramaScript {
        schema: SCRIPT_SCHEMA.into(),
        title: "The Unsigned Letter".into(),
        background: sentences.first().map(|s| s.text.clone()).unwrap_or_default(),
        roster,
        scenes,
    };
    format!("### {}\n```json\n{}```\n", gen_prompts::SCRIPT, serialize_script(&script))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{run_pipeline, story_to_script, GenerationConfig, PremiseParagraph};
    use crate::llm::{LlmGateway, RetryPolicy};

    fn gateway() -> LlmGateway {
        LlmGateway::new(Arc::new(Autopilot::default().into_provider()), RetryPolicy::immediate(1))
    }

    #[test]
    fn drives_the_whole_generation_pipeline() {
        let premise = PremiseParagraph::new(
            "A storm strands travellers at a mountain station where an unsigned letter has summoned a young \
             archivist. Nobody admits to sending it, and the station keeper refuses to open the old office. \
             The archivist must find out who wrote the letter before the first train leaves at dawn, and what \
             promise it was meant to break.",
        )
        .unwrap();
        let gw = gateway();
        let out = run_pipeline(&premise, 7, &gw, &GenerationConfig::default()).unwrap();
        assert_eq!(out.report.total_calls, 15);
        assert_eq!(out.story.refinement_round, 3);
        let script = story_to_script(&out.story, &gw).unwrap().script;
        assert!((3..=5).contains(&script.scenes.len()));
    }
}
