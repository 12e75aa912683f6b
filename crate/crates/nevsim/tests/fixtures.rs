//! Bundled fixture management.
//!
//! `fixtures/fleet.csv` and `fixtures/scenario.json` are committed so the
//! CLI works out of the box. They are derived from code: the fleet from the
//! synthetic generator, the config from the calibrated reference scenario.
//! The ignored test regenerates them; the checked test fails if the
//! committed files drift from the generators.

use std::path::PathBuf;

use nevsim::ecomodel::reference_scenario;
use nevsim::scenario::synthetic::{generate_fleet, SyntheticConfig};
use nevsim::scenario::{ForecastConfig, InputsConfig, ScenarioConfig};
use nevsim::telemetry::records_to_csv;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn bundled_fleet_csv() -> String {
    let fleet = generate_fleet(&SyntheticConfig::default());
    records_to_csv(&fleet.records)
}

fn bundled_scenario_config() -> ScenarioConfig {
    let reference = reference_scenario();
    ScenarioConfig {
        telemetry: vec![PathBuf::from("fleet.csv")],
        out_dir: PathBuf::from("out"),
        seed: 42,
        horizon: 24,
        bucket_s: 1800,
        split: 0.8,
        nev_population: reference.nevi_before,
        delta_nev_population: reference.delta_nev_population,
        forecast: ForecastConfig {
            budget: 4,
            space: nevsim::forecast::ForecastSearchSpace {
                hidden: (4, 8),
                learning_rate: (5e-3, 8e-2),
                window: (4, 12),
                epochs: (30, 80),
            },
        },
        // The calibrated snapshots drive the tables directly; the forecast
        // stage still runs for diagnostics and entropy weighting.
        series_map: Vec::new(),
        inputs: InputsConfig {
            before: reference.inputs_before,
            after: reference.inputs_after,
        },
        weights: Some(reference.coefficients.w),
        coefficients: reference.coefficients,
        ..ScenarioConfig::default()
    }
}

fn bundled_scenario_json() -> String {
    serde_json::to_string_pretty(&bundled_scenario_config()).expect("serializable") + "\n"
}

#[test]
#[ignore = "writes fixtures/fleet.csv and fixtures/scenario.json"]
fn regenerate_bundled_fixtures() {
    let dir = fixtures_dir();
    std::fs::create_dir_all(&dir).expect("fixtures dir");
    std::fs::write(dir.join("fleet.csv"), bundled_fleet_csv()).expect("write fleet");
    std::fs::write(dir.join("scenario.json"), bundled_scenario_json()).expect("write config");
}

#[test]
fn committed_fixtures_match_generators() {
    let dir = fixtures_dir();
    let fleet = std::fs::read_to_string(dir.join("fleet.csv"))
        .expect("fixtures/fleet.csv missing; run the regenerate test");
    assert_eq!(fleet, bundled_fleet_csv(), "fleet.csv drifted; regenerate");
    let config = std::fs::read_to_string(dir.join("scenario.json"))
        .expect("fixtures/scenario.json missing; run the regenerate test");
    assert_eq!(
        config,
        bundled_scenario_json(),
        "scenario.json drifted; regenerate"
    );
}

#[test]
fn bundled_config_parses_and_validates() {
    let config = ScenarioConfig::load(&fixtures_dir().join("scenario.json")).expect("loads");
    assert_eq!(config.weights.map(|w| w.len()), Some(7));
    assert_eq!(config.horizon, 24);
}
