//! Fixtures shared by the benchmarks.

use std::path::{Path, PathBuf};

use avclbf::scenario::parse_scenario;
use avclbf::ScenarioConfig;

pub fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn load(name: &str) -> ScenarioConfig {
    let p = scenario_dir().join(name);
    parse_scenario(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}
