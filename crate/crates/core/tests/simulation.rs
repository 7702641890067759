use std::sync::Arc;

use stagecraft_core::autopilot::Autopilot;
use stagecraft_core::bundled::example_script;
use stagecraft_core::llm::{LlmGateway, RetryPolicy};
use stagecraft_core::runtime::{ArchitectureConfig, ArchitectureKind};
use stagecraft_core::simulation::{compare_architectures, persona, personas, run_playthrough, SimError};

fn autopilot() -> LlmGateway {
    LlmGateway::new(Arc::new(Autopilot::default().into_provider()), RetryPolicy::immediate(1))
}

#[test]
fn director_actor_walks_the_example_in_thirty_turns() {
    let run = run_playthrough(
        &example_script(),
        persona("screenwriter").unwrap(),
        ArchitectureConfig::new(ArchitectureKind::DirectorActor),
        60,
        &autopilot(),
        &autopilot(),
    )
    .unwrap();
    let r = &run.report;
    assert!(r.finished, "{r:#?}");
    assert_eq!(r.turns, 30);
    assert_eq!(r.ledger_total, 66);
    assert!(r.ledger_matches());
    assert_eq!(r.completion_rate(), 1.0);
    assert_eq!(r.reflections_accepted, 6);
    assert_eq!(r.reflections_adapted, 3);
    assert!(r.lint.is_empty(), "{:?}", r.lint);
}

#[test]
fn troublemaker_only_breaks() {
    let run = run_playthrough(
        &example_script(),
        persona("troublemaker").unwrap(),
        ArchitectureConfig::new(ArchitectureKind::Hybrid),
        60,
        &autopilot(),
        &autopilot(),
    )
    .unwrap();
    let hist = &run.report.strategies;
    assert_eq!(hist.keys().collect::<Vec<_>>(), vec!["Breaking"]);
    assert_eq!(hist["Breaking"]["Avoid"], run.report.turns);
    assert!(run.report.ledger_matches());
}

#[test]
fn zero_turns_is_a_precondition_error() {
    let err = run_playthrough(
        &example_script(),
        &personas()[0],
        ArchitectureConfig::new(ArchitectureKind::Hybrid),
        0,
        &autopilot(),
        &autopilot(),
    )
    .unwrap_err();
    assert!(matches!(err, SimError::Precondition(_)));
}

#[test]
fn cutoff_stops_early() {
    let run = run_playthrough(
        &example_script(),
        &personas()[0],
        ArchitectureConfig::new(ArchitectureKind::Hybrid),
        7,
        &autopilot(),
        &autopilot(),
    )
    .unwrap();
    assert_eq!(run.report.turns, 7);
    assert!(!run.report.finished);
    assert!(run.report.ledger_matches());
}

#[test]
fn comparison_rows_and_speedup() {
    let all: Vec<_> = personas().iter().collect();
    let rows = compare_architectures(&example_script(), &all[..2], 60, &|| (autopilot(), autopilot())).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].inferences, 2 * 66);
    assert_eq!(rows[1].inferences, 2 * 56);
    assert_eq!(rows[2].reflection_calls, 0);
    assert!((rows[1].speedup - 66.0 / 56.0).abs() < 1e-12);
    for row in &rows {
        assert_eq!(row.inferences, row.predicted);
    }
}
