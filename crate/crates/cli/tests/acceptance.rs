//! Acceptance suite: one PASS/FAIL line per headline criterion, each with a
//! pinned tolerance and time limit. Runs offline against mock providers.
//!
//! Golden files live in `tests/golden`; regenerate with `UPDATE_GOLDEN=1`.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use stagecraft_core::autopilot::Autopilot;
use stagecraft_core::bundled::{example_script, EXAMPLE_SCRIPT_NAME};
use stagecraft_core::generation::{
    run_pipeline, story_has_flashback, story_to_script, GenerationConfig, GenerationError, PremiseParagraph, Story,
};
use stagecraft_core::llm::{CallRole, ChatRequest, InputClass, LlmGateway, MockProvider, MockReply, RetryPolicy};
use stagecraft_core::playbook::{Catalog, SituationId, TechniqueId, TechniqueSelection, BUNDLED_CATALOG};
use stagecraft_core::runtime::{
    inference_count, ArchitectureConfig, ArchitectureKind, Decision, Session, TurnRecord,
};
use stagecraft_core::script::{serialize_script, DramaScript, Plot, PlotChain, ReflectionBound};
use stagecraft_core::simulation::{personas, run_playthrough, BUNDLED_PERSONAS};

const CATALOG_SHA256: &str = "e47167e3123d35cfec8906d83d2214731bc5875464b6db2e9bed84e5983f32ac";
const PERSONAS_SHA256: &str = "29826cd3530ab9696dfc1b8e8cd33da9681139c4aff76b46d3bb8c0bae10e30e";

const PREMISE: &str = "A storm strands travellers at a mountain station where an unsigned letter has summoned \
    a young archivist. Nobody admits to sending it, and the station keeper refuses to open the old office. The \
    archivist must find out who wrote the letter before the first train leaves at dawn, and what promise it was \
    meant to break.";

const LINES: [&str; 4] = [
    "Who wrote the note about the strongbox?",
    "Nice weather for ducks, huh?",
    "I climb the roof and sing.",
    "",
];

const FLASHBACK_MARKERS: [&str; 2] = ["flashback", "years earlier"];

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    tolerance: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn gateway(provider: MockProvider) -> (LlmGateway, Arc<MockProvider>) {
    let provider = Arc::new(provider);
    (LlmGateway::new(provider.clone(), RetryPolicy::immediate(1)), provider)
}

fn autopilot() -> (LlmGateway, Arc<MockProvider>) {
    gateway(Autopilot::default().into_provider())
}

fn premise() -> PremiseParagraph {
    PremiseParagraph::new(PREMISE).unwrap()
}

fn play(session: &mut Session, gw: &LlmGateway, turns: usize) -> Result<(), String> {
    for t in 0..turns {
        if session.is_finished() {
            break;
        }
        session.step(LINES[t % LINES.len()], gw).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn call_count_law() -> Outcome {
    let config = GenerationConfig::default();
    ensure(config.expected_calls() == 15, || format!("closed form gives {}", config.expected_calls()))?;
    for seed in 0..5u64 {
        let (gw, provider) = autopilot();
        let out = run_pipeline(&premise(), seed, &gw, &config).map_err(|e| e.to_string())?;
        let requests = provider.requests();
        ensure(requests.len() == 15, || format!("seed {seed}: {} provider calls", requests.len()))?;
        for role in [CallRole::Writer, CallRole::Critic, CallRole::Reviser, CallRole::Judge, CallRole::Refiner] {
            let n = requests.iter().filter(|r| r.role == role).count();
            ensure(n == 3, || format!("seed {seed}: {n} {} calls", role.as_str()))?;
        }
        ensure(out.report.total_calls == 15, || format!("seed {seed}: report says {}", out.report.total_calls))?;
    }
    Ok("15 calls (3 writer, 3 critic, 3 reviser, 3 judge, 3 refiner) on 5 seeds".into())
}

fn refined(text: &str) -> Story {
    let selection = TechniqueSelection {
        situation: SituationId::Reunion,
        techniques: vec![TechniqueId::Suspense, TechniqueId::NonLinear, TechniqueId::Symbolism],
        iteration: 1,
    };
    let mut story = Story::from_text(
        text,
        "outline",
        "Avery Lane: the protagonist.\nMara Quill: an archivist.\nTobias Venn: a courier.",
        selection,
    );
    story.refinement_round = 3;
    story
}

fn has_marker(text: &str) -> bool {
    let lower = text.to_lowercase();
    FLASHBACK_MARKERS.iter().any(|m| lower.contains(m))
}

fn check_segmentation(story: &Story, script: &DramaScript) -> Result<bool, String> {
    let n = script.scenes.len();
    ensure((3..=5).contains(&n), || format!("{n} scenes"))?;
    let flashback = story_has_flashback(story);
    let flash_scenes = script.scenes.iter().filter(|s| s.is_flashback).count();
    if !flashback {
        ensure(flash_scenes == 0, || "flashback scene without flashback material".into())?;
        return Ok(false);
    }
    ensure(flash_scenes >= 1, || "flashback story has no flashback scene".into())?;
    for scene in &script.scenes {
        for plot in scene.plot_chain.iter() {
            ensure(!has_marker(&plot.description) || scene.is_flashback, || {
                format!("flashback plot {} sits in present-day scene {}", plot.id, scene.index)
            })?;
        }
    }
    Ok(true)
}

fn scene_count_contract() -> Outcome {
    let (mut scripts, mut flashbacks) = (0, 0);
    for seed in 0..12u64 {
        let (gw, _) = autopilot();
        let out = run_pipeline(&premise(), seed, &gw, &GenerationConfig::default()).map_err(|e| e.to_string())?;
        let script = story_to_script(&out.story, &gw).map_err(|e| format!("seed {seed}: {e}"))?.script;
        flashbacks += check_segmentation(&out.story, &script).map_err(|e| format!("seed {seed}: {e}"))? as usize;
        scripts += 1;
    }
    let fixture = refined(
        "Avery Lane arrives at the station. Mara Quill waits by the clock.\n\n\
         Flashback: years earlier, Mara and Tobias made a promise. They swore to keep it.\n\n\
         Tobias Venn arrives late. Avery Lane reads the letter aloud. The train leaves at dawn.",
    );
    let (gw, _) = autopilot();
    let script = story_to_script(&fixture, &gw).map_err(|e| e.to_string())?.script;
    ensure(check_segmentation(&fixture, &script)?, || "fixture lost its flashback".into())?;
    scripts += 1;
    flashbacks += 1;

    let linear = refined(
        "Avery Lane arrives at the station. Mara Quill waits by the clock.\n\n\
         Tobias Venn arrives late and will not say why.\n\n\
         Avery Lane reads the letter aloud. The train leaves at dawn.",
    );
    let script = story_to_script(&linear, &gw).map_err(|e| e.to_string())?.script;
    ensure(!check_segmentation(&linear, &script)?, || "linear story treated as flashback".into())?;
    scripts += 1;

    let pilot = Autopilot::default();
    let unflagged = MockProvider::stub(move |req: &ChatRequest, _| {
        MockReply::Text(pilot.respond(req).replace("\"is_flashback\": true", "\"is_flashback\": false"))
    });
    let (gw, _) = gateway(unflagged);
    let err = story_to_script(&fixture, &gw).err();
    ensure(matches!(err, Some(GenerationError::Segmentation { .. })), || {
        format!("unisolated flashback accepted: {err:?}")
    })?;
    ensure(flashbacks >= 2, || format!("only {flashbacks} flashback fixtures exercised"))?;
    Ok(format!("{scripts} scripts in 3..=5 scenes, {flashbacks} with isolated flashbacks, unflagged output rejected"))
}

const DESCRIPTIONS: [&str; 4] = ["find the key", "open the door", "ask about the note", " "];

fn random_chain(rng: &mut ChaCha8Rng) -> PlotChain {
    let n = rng.random_range(0..6);
    PlotChain::new(
        (0..n)
        .map(|i| {
            let mut p = Plot::new(format!("p{i}"), *DESCRIPTIONS[..3].choose(rng).unwrap())
                .completed(rng.random_bool(0.4));
            if rng.random_bool(0.3) {
                p = p.owned_by("Ana");
            }
            if rng.random_bool(0.2) {
                p = p.reflected();
            }
            p
        })
        .collect(),
    )
}

fn random_edit(old: &PlotChain, rng: &mut ChaCha8Rng) -> PlotChain {
    let mut plots = old.plots.clone();
    for _ in 0..rng.random_range(0..4) {
        let n = plots.len();
        match rng.random_range(0..12) {
            0..=3 if n > 0 => {
                let i = rng.random_range(0..n);
                plots[i].description = DESCRIPTIONS.choose(rng).unwrap().to_string();
            }
            4..=6 if n > 0 => {
                let i = rng.random_range(0..n);
                plots[i].completed = !plots[i].completed;
            }
            7..=8 => {
                let at = rng.random_range(0..=n);
                let id = format!("p{}", rng.random_range(0..9));
                plots.insert(at, Plot::new(id, "a new lead").completed(rng.random_bool(0.2)));
            }
            9 if n > 0 => {
                plots.remove(rng.random_range(0..n));
            }
            10 if n > 1 => {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                plots.swap(a, b);
            }
            11 if n > 0 => {
                let i = rng.random_range(0..n);
                plots[i].owner = if plots[i].owner.is_some() { None } else { Some("Ben".into()) };
            }
            _ => {}
        }
    }
    PlotChain::new(plots)
}

/// Brute force: tries every subset of completions, then every sequence of up
/// to `budget` rewrites of originally incomplete plots or insertions of fresh
/// incomplete plots, and reports whether `target` is reachable.
fn oracle_accepts(old: &PlotChain, target: &PlotChain, budget: u32) -> bool {
    let distinct = |c: &PlotChain| c.iter().map(|p| p.id.as_str()).collect::<HashSet<_>>().len() == c.len();
    if !distinct(old) || !distinct(target) || target.iter().any(|p| p.description.trim().is_empty()) {
        return false;
    }
    let open: Vec<usize> = (0..old.len()).filter(|&i| !old.plots[i].completed).collect();
    (0u32..1 << open.len()).any(|mask| {
        let mut start = old.plots.clone();
        for (bit, &i) in open.iter().enumerate() {
            start[i].completed |= mask & (1 << bit) != 0;
        }
        explore(&start, old, target, budget)
    })
}

fn explore(current: &[Plot], old: &PlotChain, target: &PlotChain, budget: u32) -> bool {
    if current == target.plots.as_slice() {
        return true;
    }
    if budget == 0 {
        return false;
    }
    let rewrites = (0..current.len().min(target.len())).filter_map(|i| {
        let was_open = old.get(&current[i].id).is_some_and(|p| !p.completed);
        (was_open && current[i].description != target.plots[i].description).then(|| {
            let mut next = current.to_vec();
            next[i].description = target.plots[i].description.clone();
            next
        })
    });
    let inserts = (0..target.len().min(current.len() + 1)).filter_map(|j| {
        let p = &target.plots[j];
        let fresh = old.get(&p.id).is_none() && current.iter().all(|c| c.id != p.id);
        (fresh && !p.completed).then(|| {
            let mut next = current.to_vec();
            next.insert(j, p.clone());
            next
        })
    });
    rewrites.chain(inserts).any(|next| explore(&next, old, target, budget - 1))
}

fn reflection_bound_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let bound = ReflectionBound::new(1);
    let (mut accepted, mut disagreements) = (0, Vec::new());
    for case in 0..10_000 {
        let old = random_chain(&mut rng);
        let new = random_edit(&old, &mut rng);
        let verdict = bound.check(&old, &new);
        let expected = oracle_accepts(&old, &new, 1);
        if verdict.is_accepted() != expected || (!expected && verdict.chain() != &old) {
            disagreements.push(case);
        }
        accepted += expected as usize;
    }
    ensure(disagreements.is_empty(), || {
        format!("{} disagreements, first cases {:?}", disagreements.len(), &disagreements[..disagreements.len().min(5)])
    })?;
    ensure((1000..9000).contains(&accepted), || format!("degenerate fuzz mix: {accepted} accepted"))?;
    Ok(format!("10000 pairs, {accepted} accepted, 0 disagreements"))
}

fn prompt_plot_ids(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix("[x] ").or_else(|| l.strip_prefix("[ ] ")))
        .filter_map(|l| l.split_once(':').map(|(id, _)| id.trim().to_string()))
        .collect()
}

/// A provider that answers every runtime role with random but well-formed
/// output: spurious and unknown completions, contract-breaking strategies,
/// and reflection proposals that try to reopen, drop or rewrite plots.
fn chaos(seed: u64, names: Vec<String>) -> MockProvider {
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
    MockProvider::stub(move |req: &ChatRequest, _| {
        let mut rng = rng.lock().unwrap();
        let ids = prompt_plot_ids(&req.transcript());
        let mut completions: Vec<String> = ids.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
        if rng.random_bool(0.1) {
            completions.push("ghost".into());
        }
        let class = *["InPlot", "Daily", "Breaking"].choose(&mut *rng).unwrap();
        let strategy = if rng.random_bool(0.9) == (class == "InPlot") {
            String::new()
        } else {
            format!("STRATEGY: {}\n", ["Avoid", "Ignore-Question", "Associate"].choose(&mut *rng).unwrap())
        };
        let speaker = names.choose(&mut *rng).unwrap().clone();
        let text = match req.role {
            CallRole::Director => format!(
                "COMPLETED: [{}]\nCLASS: {class}\n{strategy}SPEAKER: {speaker}\nMOTIVATION: press on\n",
                completions.join(", ")
            ),
            CallRole::Global => format!(
                "COMPLETED: [{}]\nCLASS: {class}\n{strategy}SPEAKER: {speaker}\nTO: all\nSAY: hm\n",
                completions.join(", ")
            ),
            CallRole::Actor => "TO: all\nSAY: well then\n".into(),
            CallRole::Reflection => {
                let mut out = String::from("PLOTS:\n");
                for id in &ids {
                    if rng.random_bool(0.1) {
                        continue;
                    }
                    let mark = if rng.random_bool(0.4) { "x" } else { " " };
                    let desc = if rng.random_bool(0.3) { "changed course" } else { "kept" };
                    out.push_str(&format!("[{mark}] {id}: {desc}\n"));
                }
                if rng.random_bool(0.3) {
                    out.push_str("[ ] +: a fresh lead\n");
                }
                out
            }
            _ => "CLASS: Daily\n".into(),
        };
        MockReply::Text(text)
    })
}

struct ChaosStats {
    sessions: usize,
    committed: usize,
    failed: usize,
    decisions: Vec<Decision>,
}

fn chaos_sessions(count: u64) -> Result<ChaosStats, String> {
    let script = example_script();
    let names: Vec<String> = script.roster.iter().map(|c| c.name.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4A05);
    let mut stats = ChaosStats {
        sessions: 0,
        committed: 0,
        failed: 0,
        decisions: Vec::new(),
    };
    for seed in 0..count {
        let kind = ArchitectureKind::ALL[rng.random_range(0..3)];
        let k = rng.random_bool(0.8).then(|| rng.random_range(1..6));
        let (gw, _) = gateway(chaos(seed, names.clone()));
        let mut session = Session::new(script.clone(), ArchitectureConfig::new(kind).with_k(k)).unwrap();
        let mut done: HashSet<(usize, String)> = HashSet::new();
        for t in 0..30 {
            if session.is_finished() {
                break;
            }
            let before = session.clone();
            match session.step(LINES[t % LINES.len()], &gw) {
                Ok(result) => {
                    stats.committed += 1;
                    stats.decisions.push(result.decision);
                }
                Err(_) => {
                    stats.failed += 1;
                    ensure(session == before, || format!("session {seed}: failed turn {t} changed state"))?;
                }
            }
            if session.scene_cursor == before.scene_cursor && !session.is_finished() {
                for (_, id) in done.iter().filter(|(s, _)| *s == session.scene_cursor) {
                    ensure(session.chain.get(id).is_some_and(|p| p.completed), || {
                        format!("session {seed} turn {t}: plot {id} reverted")
                    })?;
                }
            }
            for id in session.chain.completed_ids() {
                done.insert((session.scene_cursor, id.to_string()));
            }
        }
        stats.sessions += 1;
    }
    Ok(stats)
}

fn monotonicity() -> Outcome {
    let stats = chaos_sessions(1000)?;
    ensure(stats.failed > 0 && stats.committed > stats.failed, || {
        format!("fuzz mix degenerate: {} committed, {} failed", stats.committed, stats.failed)
    })?;
    Ok(format!(
        "{} sessions, {} committed turns, {} rejected turns, 0 reversions",
        stats.sessions, stats.committed, stats.failed
    ))
}

fn inference_laws() -> Outcome {
    let expected = [
        (ArchitectureKind::DirectorActor, Some(5), 66),
        (ArchitectureKind::Hybrid, Some(5), 56),
        (ArchitectureKind::OneForAll, Some(5), 36),
        (ArchitectureKind::Hybrid, None, 50),
    ];
    let mut totals = Vec::new();
    for (kind, k, total) in expected {
        let (gw, provider) = autopilot();
        let mut session = Session::new(example_script(), ArchitectureConfig::new(kind).with_k(k)).unwrap();
        play(&mut session, &gw, 100)?;
        ensure(session.turn == 30 && session.is_finished(), || format!("{kind}: {} turns", session.turn))?;
        let live = session.ledger.logical_total();
        let closed = inference_count(kind, &session.scene_turns, k);
        ensure(live == total && closed == total && provider.calls() as u64 == total, || {
            format!("{kind} k={k:?}: live {live}, closed form {closed}, provider {}, expected {total}", provider.calls())
        })?;
        for entry in &session.ledger.entries {
            let base = entry.calls.logical() - entry.calls.reflection;
            ensure(base == 1 || base == 2, || format!("{kind}: turn {} used {base} calls", entry.turn))?;
            ensure(entry.calls.reflection <= 1, || format!("{kind}: turn {} reflected twice", entry.turn))?;
        }
        totals.push(total);
    }
    let ratio = totals[0] as f64 / totals[1] as f64;
    ensure((ratio - 66.0 / 56.0).abs() < 1e-12, || format!("ratio {ratio}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x1ED6E5);
    for case in 0..200 {
        let kind = ArchitectureKind::ALL[rng.random_range(0..3)];
        let k = rng.random_bool(0.8).then(|| rng.random_range(1..8));
        let turns = rng.random_range(1..40);
        let (gw, _) = autopilot();
        let mut session = Session::new(example_script(), ArchitectureConfig::new(kind).with_k(k)).unwrap();
        play(&mut session, &gw, turns)?;
        let (live, closed) = (session.ledger.logical_total(), inference_count(kind, &session.scene_turns, k));
        ensure(live == closed, || format!("sweep case {case}: live {live} vs closed form {closed}"))?;
    }
    Ok(format!(
        "director-actor {}, hybrid {}, one-for-all {}, hybrid k=off {}; count speedup {ratio:.3}; 200 sweep sessions match",
        totals[0], totals[1], totals[2], totals[3]
    ))
}

fn leaky_director() -> MockProvider {
    let pilot = Autopilot::default();
    MockProvider::stub(move |req: &ChatRequest, _| {
        let reply = pilot.respond(req);
        if req.role != CallRole::Director {
            return MockReply::Text(reply);
        }
        let prompt = req.transcript();
        let secret = prompt
            .lines()
            .filter_map(|l| l.strip_prefix("[ ] ").and_then(|l| l.split_once(": ")).map(|(_, d)| d.to_string()))
            .next();
        match secret {
            Some(secret) => MockReply::Text(
                reply
                    .lines()
                    .map(|l| if l.starts_with("MOTIVATION:") { format!("MOTIVATION: Make sure that {secret}") } else { l.into() })
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            None => MockReply::Text(reply),
        }
    })
}

fn information_hiding() -> Outcome {
    let (gw, _) = autopilot();
    let out = run_pipeline(&premise(), 8, &gw, &GenerationConfig::default()).map_err(|e| e.to_string())?;
    let generated = story_to_script(&out.story, &gw).map_err(|e| e.to_string())?.script;
    let mut actor_prompts = 0;
    for script in [example_script(), generated] {
        for provider in [Autopilot::default().into_provider(), leaky_director()] {
            let (gw, provider) = gateway(provider);
            let mut session =
                Session::new(script.clone(), ArchitectureConfig::new(ArchitectureKind::DirectorActor)).unwrap();
            let mut secrets: HashSet<String> = script.all_plot_descriptions().map(str::to_string).collect();
            for t in 0..60 {
                if session.is_finished() {
                    break;
                }
                session.step(LINES[t % LINES.len()], &gw).map_err(|e| e.to_string())?;
                secrets.extend(session.chain.iter().map(|p| p.description.clone()));
            }
            for request in provider.requests().iter().filter(|r| r.role == CallRole::Actor) {
                let serialized = serde_json::to_string(request).unwrap();
                let plain = request.transcript();
                for secret in &secrets {
                    let encoded = serde_json::to_string(secret).unwrap();
                    ensure(!plain.contains(secret.as_str()) && !serialized.contains(encoded.trim_matches('"')), || {
                        format!("actor prompt leaked `{secret}`")
                    })?;
                }
                actor_prompts += 1;
            }
        }
    }
    ensure(actor_prompts > 0, || "no actor prompts observed".into())?;
    Ok(format!("{actor_prompts} actor prompts across 2 scripts and a leaky director, 0 leaks"))
}

fn strategy_holds(d: &Decision) -> bool {
    match d.input_class {
        InputClass::InPlot => d.strategy.is_none(),
        InputClass::Daily | InputClass::Breaking => d.strategy.is_some(),
    }
}

fn strategy_contract() -> Outcome {
    let mut by_class: BTreeMap<String, usize> = BTreeMap::new();
    let mut count = |d: &Decision| -> Result<(), String> {
        ensure(strategy_holds(d), || format!("{:?} turn carries {:?}", d.input_class, d.strategy))?;
        *by_class.entry(format!("{:?}", d.input_class)).or_default() += 1;
        Ok(())
    };
    let script = example_script();
    for persona in personas() {
        for kind in ArchitectureKind::ALL {
            let (drama, _) = autopilot();
            let (player, _) = autopilot();
            let run = run_playthrough(&script, persona, ArchitectureConfig::new(kind), 60, &drama, &player)
                .map_err(|e| format!("{} / {kind}: {e}", persona.id))?;
            for record in &run.transcript {
                count(&record.decision)?;
            }
        }
    }
    for kind in ArchitectureKind::ALL {
        let (gw, _) = autopilot();
        let mut session = Session::new(script.clone(), ArchitectureConfig::new(kind)).unwrap();
        for t in 0..30 {
            count(&session.step(LINES[t % LINES.len()], &gw).map_err(|e| e.to_string())?.decision)?;
        }
    }
    for d in &chaos_sessions(100)?.decisions {
        count(d)?;
    }
    ensure(by_class.len() == 3, || format!("classes seen: {by_class:?}"))?;
    let cells: Vec<String> = by_class.iter().map(|(c, n)| format!("{c}={n}")).collect();
    Ok(format!("{} committed turns ({})", by_class.values().sum::<usize>(), cells.join(", ")))
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn golden_run() -> Result<BTreeMap<&'static str, String>, String> {
    let (gw, _) = autopilot();
    let out = run_pipeline(&premise(), 2024, &gw, &GenerationConfig::default()).map_err(|e| e.to_string())?;
    let script = story_to_script(&out.story, &gw).map_err(|e| e.to_string())?.script;
    let persona = stagecraft_core::simulation::persona("fan-girl").ok_or("missing persona")?;
    let (drama, _) = autopilot();
    let (player, _) = autopilot();
    let run = run_playthrough(&script, persona, ArchitectureConfig::new(ArchitectureKind::Hybrid), 60, &drama, &player)
        .map_err(|e| e.to_string())?;
    let transcript: String = run
        .transcript
        .iter()
        .map(|r: &TurnRecord| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    Ok(BTreeMap::from([
        ("story.txt", out.story.text() + "\n"),
        ("script.json", serialize_script(&script)),
        ("transcript.jsonl", transcript),
    ]))
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(data_dir: &Path) -> Result<Self, String> {
        let port = free_port();
        let config = data_dir.with_extension("toml");
        std::fs::write(
            &config,
            format!(
                "bind = \"127.0.0.1:{port}\"\ndata_dir = {:?}\n\n[provider]\nkind = \"mock\"\nmock = \"autopilot\"\n",
                data_dir.display().to_string()
            ),
        )
        .map_err(|e| e.to_string())?;
        let child = Command::new(env!("CARGO_BIN_EXE_stagecraft"))
            .args(["serve", "--config", config.to_str().unwrap()])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let server = Server {
            child,
            base: format!("http://127.0.0.1:{port}"),
        };
        let client = reqwest::blocking::Client::new();
        for _ in 0..200 {
            if client.get(format!("{}/health", server.base)).send().is_ok_and(|r| r.status().is_success()) {
                return Ok(server);
            }
            std::thread::sleep(Duration::from_millis(25));
        }
        Err("service did not come up".into())
    }

    fn get(&self, path: &str) -> Result<Value, String> {
        let response = reqwest::blocking::get(format!("{}{path}", self.base)).map_err(|e| e.to_string())?;
        response.json().map_err(|e| e.to_string())
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, String> {
        let response = reqwest::blocking::Client::new()
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status();
        let value: Value = response.json().map_err(|e| e.to_string())?;
        ensure(status.is_success(), || format!("POST {path}: {status} {value}"))?;
        Ok(value)
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

fn crash_resume() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let inputs: Vec<&str> = (0..14).map(|i| LINES[i % LINES.len()]).collect();

    let server = Server::start(&data)?;
    let created = server.post("/sessions", json!({"script_id": EXAMPLE_SCRIPT_NAME}))?;
    let id = created["handle"]["id"].as_str().ok_or("no session id")?.to_string();
    for text in &inputs[..7] {
        server.post(&format!("/sessions/{id}/message"), json!({ "text": text }))?;
    }
    let transcript = server.get(&format!("/sessions/{id}/transcript"))?;
    let plots = server.get(&format!("/sessions/{id}/plots"))?;
    server.kill();

    let log = data.join("sessions").join(format!("{id}.jsonl"));
    let mut file = std::fs::OpenOptions::new().append(true).open(&log).map_err(|e| e.to_string())?;
    file.write_all(b"{\"event\":\"turn\",\"record\":{\"turn\":8,").map_err(|e| e.to_string())?;
    drop(file);

    let server = Server::start(&data)?;
    ensure(server.get(&format!("/sessions/{id}/transcript"))? == transcript, || "transcript differs after restart".into())?;
    ensure(server.get(&format!("/sessions/{id}/plots"))? == plots, || "plot view differs after restart".into())?;
    for text in &inputs[7..] {
        server.post(&format!("/sessions/{id}/message"), json!({ "text": text }))?;
    }
    let resumed = server.get(&format!("/sessions/{id}/transcript"))?;
    let resumed_plots = server.get(&format!("/sessions/{id}/plots"))?;
    server.kill();

    let (gw, _) = autopilot();
    let mut reference = Session::new(example_script(), ArchitectureConfig::new(ArchitectureKind::Hybrid)).unwrap();
    for text in &inputs {
        reference.step(text, &gw).map_err(|e| e.to_string())?;
    }
    ensure(resumed["entries"] == serde_json::to_value(&reference.memory).unwrap(), || {
        "resumed transcript differs from an uninterrupted run".into()
    })?;
    ensure(resumed_plots["chain"] == serde_json::to_value(&reference.chain).unwrap(), || {
        "resumed plot chain differs from an uninterrupted run".into()
    })?;
    Ok(format!("killed after 7 turns with a torn write, resumed to {} identical turns", inputs.len()))
}

fn determinism_and_resume() -> Outcome {
    let first = golden_run()?;
    let second = golden_run()?;
    ensure(first == second, || "two runs with the same seed differ".into())?;
    let dir = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for (name, text) in &first {
            std::fs::write(dir.join(name), text).map_err(|e| e.to_string())?;
        }
    }
    for (name, text) in &first {
        let golden = std::fs::read_to_string(dir.join(name))
            .map_err(|e| format!("golden {name} unreadable ({e}); run with UPDATE_GOLDEN=1"))?;
        ensure(&golden == text, || format!("{name} differs from golden file"))?;
    }
    let resume = crash_resume()?;
    Ok(format!("story, script and transcript byte-identical to golden files; {resume}"))
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn catalog_fidelity() -> Outcome {
    ensure(sha256(BUNDLED_CATALOG) == CATALOG_SHA256, || format!("catalog hash {}", sha256(BUNDLED_CATALOG)))?;
    ensure(sha256(BUNDLED_PERSONAS) == PERSONAS_SHA256, || format!("persona hash {}", sha256(BUNDLED_PERSONAS)))?;
    let catalog = Catalog::bundled();
    ensure(catalog.situations.len() == 8 && catalog.techniques.len() == 6, || "catalog shape".into())?;
    ensure(personas().len() == 10, || format!("{} personas", personas().len()))?;
    let listed = Command::new(env!("CARGO_BIN_EXE_stagecraft"))
        .args(["playbook", "list", "--json"])
        .output()
        .map_err(|e| e.to_string())?;
    let listed: Catalog = serde_json::from_slice(&listed.stdout).map_err(|e| e.to_string())?;
    ensure(&listed == catalog, || "`playbook list --json` differs from the data file".into())?;
    Ok("catalog and persona data files match pinned SHA-256; CLI listing round-trips".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "pipeline call-count law", tolerance: "exact", limit: Some(Duration::from_secs(1)), run: call_count_law },
        Criterion { id: 2, name: "scene-count contract", tolerance: "exact", limit: Some(Duration::from_secs(1)), run: scene_count_contract },
        Criterion { id: 3, name: "reflection bound suite", tolerance: "0 disagreements", limit: Some(Duration::from_secs(30)), run: reflection_bound_suite },
        Criterion { id: 4, name: "plot-chain monotonicity", tolerance: "exact", limit: Some(Duration::from_secs(60)), run: monotonicity },
        Criterion { id: 5, name: "inference-count laws", tolerance: "exact counts, ratio 66/56", limit: Some(Duration::from_secs(10)), run: inference_laws },
        Criterion { id: 6, name: "information hiding", tolerance: "exact", limit: Some(Duration::from_secs(5)), run: information_hiding },
        Criterion { id: 7, name: "strategy contract", tolerance: "exact", limit: None, run: strategy_contract },
        Criterion { id: 8, name: "determinism and crash-resume", tolerance: "byte-identical", limit: None, run: determinism_and_resume },
        Criterion { id: 9, name: "catalog fidelity", tolerance: "exact hash", limit: None, run: catalog_fidelity },
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|n| n == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(detail), Some(limit)) if elapsed > limit => Err(format!("{detail}; too slow")),
            (outcome, _) => outcome,
        };
        let limit = c.limit.map(|l| format!(" < {} ms", l.as_millis())).unwrap_or_default();
        let timing = format!("{} ms{limit}", elapsed.as_millis());
        match outcome {
            Ok(detail) => println!("PASS [{}/9] {} ({}) {detail} [{timing}]", c.id, c.name, c.tolerance),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}/9] {} ({}) {detail} [{timing}]", c.id, c.name, c.tolerance);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
