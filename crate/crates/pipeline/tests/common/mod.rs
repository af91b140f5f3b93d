#![allow(dead_code)]

use std::path::PathBuf;

use dualarm_pipeline::{Scenario, ScenarioFile};

pub fn data_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data"))
}

pub fn scenario_path(name: &str) -> PathBuf {
    data_dir().join("scenarios").join(name)
}

pub fn shipped(name: &str) -> Scenario {
    Scenario::load(scenario_path(name)).unwrap()
}

/// Parsed scenario file, for tests that edit fields before loading.
pub fn shipped_file(name: &str) -> ScenarioFile {
    ScenarioFile::parse(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

pub fn load_edited(file: ScenarioFile) -> dualarm_pipeline::Result<Scenario> {
    Scenario::from_file(file, &data_dir().join("scenarios"))
}
