use std::io::{BufRead, Write};
use std::path::Path;

use stagecraft_core::bundled::{example_script, EXAMPLE_SCRIPT_NAME};
use stagecraft_core::generation::{
    adherence, run_pipeline, story_to_script, GenerationConfig, PremiseParagraph, RunReport,
};
use stagecraft_core::llm::{ConfigError, LlmGateway, ProviderConfig};
use stagecraft_core::playbook::Catalog;
use stagecraft_core::runtime::{
    read_events, replay, ArchitectureConfig, Session, SessionLog, SessionStatus, TurnError, TurnResult,
};
use stagecraft_core::script::{parse_script, serialize_script, validate_generated, DramaScript};
use stagecraft_core::simulation::{
    compare_architectures, persona, personas, run_playthrough, PlayerPersona, SimError,
};
use stagecraft_service::ServiceConfig;

use crate::args::{
    AdherenceArgs, ArchArgs, CompareArgs, GenerateArgs, PlayArgs, PlaybookCommand, ProviderArgs, ServeArgs,
    SimulateArgs, ValidateArgs,
};
use crate::error::CliError;

pub type Out<'a> = &'a mut dyn Write;

fn emit(out: Out, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io("stdout", e))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    write(path, &(text + "\n"))
}

impl ProviderArgs {
    pub fn config(&self) -> Result<Option<ProviderConfig>, CliError> {
        if let Some(source) = &self.mock {
            return Ok(Some(ProviderConfig::mock(source.clone())));
        }
        if let Some(endpoint) = &self.endpoint {
            let model = self
                .model
                .clone()
                .or_else(|| std::env::var(stagecraft_core::llm::ENV_MODEL).ok())
                .unwrap_or_else(|| ProviderConfig::http("", "").model);
            return Ok(Some(ProviderConfig::http(endpoint.clone(), model)));
        }
        match ProviderConfig::from_env() {
            Ok(mut config) => {
                if let Some(model) = &self.model {
                    config.model = model.clone();
                }
                Ok(Some(config))
            }
            Err(_) => Ok(None),
        }
    }

    fn require(&self) -> Result<ProviderConfig, CliError> {
        self.config()?.ok_or_else(|| {
            CliError::Usage(format!(
                "no provider selected: pass --mock <playlist|autopilot>, --endpoint <url>, or set {}",
                stagecraft_core::llm::ENV_ENDPOINT
            ))
        })
    }

    pub fn gateway(&self) -> Result<LlmGateway, CliError> {
        build_gateway(&self.require()?)
    }
}

fn build_gateway(config: &ProviderConfig) -> Result<LlmGateway, CliError> {
    config.gateway().map_err(|e| match e {
        ConfigError::MockFixture { .. } => CliError::Validation(e.to_string()),
        ConfigError::MissingEndpoint | ConfigError::UnexpectedEndpoint => CliError::Usage(e.to_string()),
        _ => CliError::Provider(e.to_string()),
    })
}

impl ArchArgs {
    pub fn config(&self) -> ArchitectureConfig {
        ArchitectureConfig::new(self.arch)
            .with_k((self.k > 0).then_some(self.k))
            .with_budget(self.reflection_budget)
    }
}

/// Loads a script from a path, falling back to the bundled script by name.
pub fn load_script(source: &str) -> Result<DramaScript, CliError> {
    let path = Path::new(source);
    if path.exists() {
        return parse_script(&read(path)?).map_err(|e| CliError::Validation(format!("{source}: {e}")));
    }
    if source == EXAMPLE_SCRIPT_NAME {
        return Ok(example_script());
    }
    Err(CliError::Validation(format!(
        "script `{source}` is neither a file nor the bundled `{EXAMPLE_SCRIPT_NAME}`"
    )))
}

fn find_persona(key: &str) -> Result<&'static PlayerPersona, CliError> {
    persona(key).ok_or_else(|| {
        let known: Vec<&str> = personas().iter().map(|p| p.id.as_str()).collect();
        CliError::Validation(format!("unknown persona `{key}` (known: {})", known.join(", ")))
    })
}

fn turn_error(err: TurnError) -> CliError {
    match err {
        TurnError::Provider(_) | TurnError::Malformed(_) => CliError::Provider(err.to_string()),
        TurnError::Finished | TurnError::Precondition(_) => CliError::Validation(err.to_string()),
    }
}

fn sim_error(err: SimError) -> CliError {
    match err {
        SimError::Aborted { .. } => CliError::Provider(err.to_string()),
        _ => CliError::Validation(err.to_string()),
    }
}

pub fn generate(args: &GenerateArgs, out: Out, err: Out) -> Result<(), CliError> {
    let premise = PremiseParagraph::new(read(&args.premise)?.trim())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let gateway = args.provider.gateway()?;
    let config = GenerationConfig {
        revise_rounds: args.revise_rounds,
        ..GenerationConfig::default()
    };
    let output = match run_pipeline(&premise, args.seed, &gateway, &config) {
        Ok(output) => output,
        Err(failure) => {
            if let Some(path) = &args.report {
                write_json(path, &failure.report)?;
            }
            return Err(if failure.error.is_provider_failure() {
                CliError::Provider(failure.to_string())
            } else {
                CliError::Validation(failure.to_string())
            });
        }
    };
    let mut report = output.report;
    if let Some(path) = &args.story {
        write(path, &(output.story.text() + "\n"))?;
    }
    let outcome = story_to_script(&output.story, &gateway);
    if let Ok(outcome) = &outcome {
        report.warnings.extend(outcome.warnings.iter().cloned());
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    let outcome = outcome.map_err(|e| {
        if e.is_provider_failure() {
            CliError::Provider(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    })?;
    for warning in &report.warnings {
        emit(err, format!("warning: {warning}"))?;
    }
    let text = serialize_script(&outcome.script);
    match &args.out {
        Some(path) => {
            write(path, &text)?;
            emit(
                out,
                format!(
                    "wrote {} ({} scenes, {} pipeline calls, {} transformer attempts)",
                    path.display(),
                    outcome.script.scenes.len(),
                    report.total_calls,
                    outcome.attempts
                ),
            )
        }
        None => emit(out, text.trim_end()),
    }
}

fn print_turn(out: Out, result: &TurnResult) -> Result<(), CliError> {
    let d = &result.decision;
    let action = d.action.as_deref().map(|a| format!(" *{a}*")).unwrap_or_default();
    emit(out, format!("[{}] {} -> {}:{action} {}", result.turn, d.speaker, d.addressee, d.utterance))?;
    if let Some(header) = &result.scene_header {
        let flashback = if header.is_flashback { " (flashback)" } else { "" };
        emit(out, format!("== Scene {}: {}{flashback} ==", header.index, header.location))?;
        emit(out, &header.background)?;
    }
    Ok(())
}

pub fn play(args: &PlayArgs, input: &mut dyn BufRead, out: Out) -> Result<(), CliError> {
    let replay_err = |e: stagecraft_core::runtime::ReplayError| CliError::Validation(e.to_string());
    let (mut session, mut log) = match &args.resume {
        Some(path) => {
            let session = replay(&read_events(path).map_err(replay_err)?).map_err(replay_err)?;
            let log = SessionLog::open(path).map_err(|e| CliError::io(path.display(), e))?;
            (session, Some(log))
        }
        None => {
            let script = load_script(args.script.as_deref().unwrap_or(EXAMPLE_SCRIPT_NAME))?;
            let session =
                Session::new(script, args.arch.config()).map_err(|e| CliError::Validation(e.to_string()))?;
            let log = match &args.log {
                Some(path) => Some(
                    SessionLog::create(path, &session.script, &session.config)
                        .map_err(|e| CliError::io(path.display(), e))?,
                ),
                None => None,
            };
            (session, log)
        }
    };
    let gateway = args.provider.gateway()?;

    emit(out, format!("{} ({} as {})", session.script.title, session.config.kind, session.player_name()))?;
    let header = session.scene_header();
    emit(out, format!("== Scene {}: {} ==", header.index, header.location))?;
    emit(out, &header.background)?;
    for line in input.lines() {
        if session.is_finished() {
            break;
        }
        let line = line.map_err(|e| CliError::io("stdin", e))?;
        let record = session.plan_turn(&line, &gateway).map_err(turn_error)?;
        if let Some(log) = log.as_mut() {
            log.append_turn(&record).map_err(|e| CliError::io(log.path().display(), e))?;
        }
        let result = session.apply_record(&record);
        print_turn(out, &result)?;
    }
    let ledger = session.ledger.totals();
    if session.status == SessionStatus::Finished {
        emit(out, "== The End ==")?;
    }
    emit(
        out,
        format!("turns: {}, inferences: {} (predicted {})", session.turn, ledger.logical(), session.predicted_inferences()),
    )
}

pub fn simulate(args: &SimulateArgs, out: Out) -> Result<(), CliError> {
    let script = load_script(&args.script)?;
    let persona = find_persona(&args.persona)?;
    let drama = args.provider.gateway()?;
    let player = args.provider.gateway()?;
    let result = run_playthrough(&script, persona, args.arch.config(), args.max_turns, &drama, &player);
    let playthrough = match result {
        Ok(p) => p,
        Err(SimError::Aborted { partial, turn, message, provider }) => {
            if let Some(path) = &args.report {
                write_json(path, &partial.report)?;
            }
            return Err(sim_error(SimError::Aborted { turn, message, provider, partial }));
        }
        Err(e) => return Err(sim_error(e)),
    };
    let report = &playthrough.report;
    if let Some(path) = &args.report {
        write_json(path, report)?;
    }
    if let Some(path) = &args.transcript {
        let lines: Vec<String> = playthrough
            .transcript
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"))
            .collect();
        write(path, &(lines.join("\n") + "\n"))?;
    }
    emit(
        out,
        format!(
            "{} / {}: {} turns, {}/{} plots ({:.0}%), {} inferences (predicted {}), finished: {}",
            report.persona,
            report.architecture.kind,
            report.turns,
            report.plots_completed,
            report.plots_total,
            report.completion_rate() * 100.0,
            report.ledger_total,
            report.predicted_total,
            report.finished
        ),
    )?;
    for (class, strategies) in &report.strategies {
        let cells: Vec<String> = strategies.iter().map(|(s, n)| format!("{s}={n}")).collect();
        emit(out, format!("  {class}: {}", cells.join(" ")))?;
    }
    emit(
        out,
        format!(
            "  reflections: {} accepted ({} adapted), {} rejected, {} failed",
            report.reflections_accepted, report.reflections_adapted, report.reflections_rejected, report.reflection_errors
        ),
    )
}

pub fn compare(args: &CompareArgs, out: Out) -> Result<(), CliError> {
    let script = load_script(&args.script)?;
    let chosen: Vec<&PlayerPersona> = if args.all_personas {
        personas().iter().collect()
    } else {
        args.personas.iter().map(|k| find_persona(k)).collect::<Result<_, _>>()?
    };
    let config = args.provider.require()?;
    build_gateway(&config)?;
    let gateways = || {
        let build = || build_gateway(&config).expect("provider config was checked");
        (build(), build())
    };
    let rows = compare_architectures(&script, &chosen, args.max_turns, &gateways).map_err(sim_error)?;
    if let Some(path) = &args.report {
        write_json(path, &rows)?;
    }
    emit(
        out,
        format!(
            "{:<22} {:>6} {:>11} {:>10} {:>11} {:>10} {:>8}",
            "architecture", "turns", "inferences", "predicted", "reflections", "completion", "speedup"
        ),
    )?;
    for row in &rows {
        emit(
            out,
            format!(
                "{:<22} {:>6} {:>11} {:>10} {:>11} {:>9.1}% {:>7.3}x",
                row.label,
                row.turns,
                row.inferences,
                row.predicted,
                row.reflection_calls,
                row.completion_rate * 100.0,
                row.speedup
            ),
        )?;
    }
    Ok(())
}

pub fn validate(args: &ValidateArgs, out: Out) -> Result<(), CliError> {
    let text = read(&args.file)?;
    let script = parse_script(&text).map_err(|e| CliError::Validation(format!("{}: {e}", args.file.display())))?;
    if args.generated {
        validate_generated(&script).map_err(|e| CliError::Validation(format!("{}: {e}", args.file.display())))?;
    }
    let plots: usize = script.scenes.iter().map(|s| s.plot_chain.len()).sum();
    emit(
        out,
        format!(
            "ok: {} ({} scenes, {} characters, {plots} plots)",
            script.title,
            script.scenes.len(),
            script.roster.len()
        ),
    )
}

pub fn playbook(command: &PlaybookCommand, out: Out) -> Result<(), CliError> {
    let PlaybookCommand::List { json } = command;
    let catalog = Catalog::bundled();
    if *json {
        let text = serde_json::to_string_pretty(catalog).map_err(|e| CliError::Validation(e.to_string()))?;
        return emit(out, text);
    }
    emit(out, "Dramatic situations")?;
    for s in &catalog.situations {
        emit(out, format!("  {}: {}", s.name, s.acts.join(" ")))?;
        emit(out, format!("    e.g. {}", s.exemplar))?;
    }
    emit(out, "Narrative techniques")?;
    for t in &catalog.techniques {
        emit(out, format!("  {}: {}", t.name, t.description))?;
    }
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| CliError::Validation(e.to_string()))?,
        None => ServiceConfig::default(),
    };
    if let Some(bind) = &args.bind {
        config.bind = bind.clone();
    }
    if args.provider.mock.is_some() || args.provider.endpoint.is_some() {
        config.provider = args.provider.require()?;
    }
    build_gateway(&config.provider)?;
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    stagecraft_service::serve_blocking(config).map_err(|e| match e {
        stagecraft_service::ServeError::Config(e) => CliError::Provider(e.to_string()),
        stagecraft_service::ServeError::Io(e) => CliError::io("serve", e),
    })
}

pub fn adherence_report(args: &AdherenceArgs, out: Out) -> Result<(), CliError> {
    let report: RunReport = serde_json::from_str(&read(&args.report)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.report.display())))?;
    let rows = adherence(&report);
    let catalog = Catalog::bundled();
    emit(out, format!("{:<22} {:>8} {:>6} {:>7}", "technique", "selected", "found", "rate"))?;
    for (id, row) in &rows {
        let rate = if row.selected == 0 { 0.0 } else { row.found as f64 / row.selected as f64 * 100.0 };
        emit(out, format!("{:<22} {:>8} {:>6} {:>6.1}%", catalog.technique(*id).name, row.selected, row.found, rate))?;
    }
    emit(out, format!("seed {}: {} calls, {} candidates", report.rng_seed, report.total_calls, report.candidates.len()))
}
