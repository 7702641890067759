use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use stagecraft_core::runtime::ArchitectureKind;
use stagecraft_core::simulation::DEFAULT_MAX_TURNS;

#[derive(Debug, Parser)]
#[command(name = "stagecraft", version, about = "Generate, play and evaluate LLM-driven interactive dramas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a premise paragraph into a story and a playable script.
    Generate(GenerateArgs),
    /// Play a script line by line on the terminal.
    Play(PlayArgs),
    /// Run one simulated playthrough with a player persona.
    Simulate(SimulateArgs),
    /// Compare director-actor, hybrid and hybrid without reflection.
    Compare(CompareArgs),
    /// Check a script file against the schema and structural rules.
    Validate(ValidateArgs),
    /// Inspect the dramatic-situation and narrative-technique catalog.
    Playbook {
        #[command(subcommand)]
        command: PlaybookCommand,
    },
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Summarize how often the critic found each selected technique.
    Adherence(AdherenceArgs),
}

/// Provider selection shared by every command that calls a model.
#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// Mock fixture file, or `autopilot` for the built-in scripted provider.
    #[arg(long, value_name = "PLAYLIST|autopilot", conflicts_with_all = ["endpoint", "model"])]
    pub mock: Option<String>,
    /// OpenAI-compatible base URL (defaults to STAGECRAFT_ENDPOINT).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Model name for the live provider (defaults to STAGECRAFT_MODEL).
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ArchArgs {
    #[arg(long, default_value = "hybrid", value_name = "director-actor|one-for-all|hybrid")]
    pub arch: ArchitectureKind,
    /// Reflection period in turns; 0 disables reflection.
    #[arg(long, default_value_t = stagecraft_core::runtime::DEFAULT_K)]
    pub k: u32,
    /// Changes a single reflection may make.
    #[arg(long, default_value_t = 1)]
    pub reflection_budget: u32,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// File holding the premise paragraph.
    #[arg(long, value_name = "FILE")]
    pub premise: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub revise_rounds: u32,
    /// Where to write the script; printed to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Where to write the run report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Where to write the refined story text.
    #[arg(long, value_name = "FILE")]
    pub story: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Script file or bundled script name.
    #[arg(required_unless_present = "resume")]
    pub script: Option<String>,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Record the session to a new event log.
    #[arg(long, value_name = "FILE", conflicts_with = "resume")]
    pub log: Option<PathBuf>,
    /// Continue the session stored in an existing event log.
    #[arg(long, value_name = "FILE")]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Script file or bundled script name.
    #[arg(long, default_value = stagecraft_core::bundled::EXAMPLE_SCRIPT_NAME)]
    pub script: String,
    /// Persona id, name or unique prefix.
    #[arg(long)]
    pub persona: String,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, default_value_t = DEFAULT_MAX_TURNS)]
    pub max_turns: u32,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Where to write the turn records as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = stagecraft_core::bundled::EXAMPLE_SCRIPT_NAME)]
    pub script: String,
    #[arg(long = "persona", required_unless_present = "all_personas")]
    pub personas: Vec<String>,
    #[arg(long, conflicts_with = "personas")]
    pub all_personas: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_TURNS)]
    pub max_turns: u32,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// Also apply the rules for generated scripts (3 to 5 scenes).
    #[arg(long)]
    pub generated: bool,
}

#[derive(Debug, Subcommand)]
pub enum PlaybookCommand {
    /// Print every situation and technique.
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML service configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the configured bind address.
    #[arg(long)]
    pub bind: Option<String>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct AdherenceArgs {
    /// Run report written by `generate --report`.
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
}
