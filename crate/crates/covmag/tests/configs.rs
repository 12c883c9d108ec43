//! The shipped experiment configs parse, validate and round-trip.

use std::path::PathBuf;

use covmag::config::{ConfigFormat, ExperimentConfig};

fn shipped() -> Vec<(String, ExperimentConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_protocol_has_a_config() {
    let mut ids: Vec<_> = shipped().iter().map(|(_, c)| c.experiment.id()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(
        ids,
        [
            "bell-covar",
            "c13-cycle",
            "phase-cycle",
            "sensitivity-curve",
            "tppi-fidelity",
            "two-time-overlap",
            "two-time-swap",
            "xy-spectrum"
        ]
    );
}

#[test]
fn file_names_start_with_their_protocol() {
    for (name, cfg) in shipped() {
        let prefix = cfg.experiment.id().replace('-', "_");
        assert!(name.starts_with(&prefix), "{name} holds a {} experiment", cfg.experiment.id());
    }
}

#[test]
fn toml_and_json_round_trip() {
    for (name, cfg) in shipped() {
        let toml = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&toml, ConfigFormat::Toml).unwrap(), cfg, "{name} via TOML");
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json, ConfigFormat::Json).unwrap(), cfg, "{name} via JSON");
    }
}

#[test]
fn sweeps_expand_to_valid_points() {
    for (name, cfg) in shipped() {
        let points = cfg.points();
        assert!(!points.is_empty(), "{name}");
        for p in points.into_iter().flatten() {
            cfg.experiment_at(p).unwrap_or_else(|e| panic!("{name} at {p}: {e}"));
        }
    }
}
