//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use hostile_mdp::Environment;

/// Path of an environment bundled with the core crate.
pub fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

pub fn load(name: &str) -> Environment {
    Environment::load(bundled(name)).expect("bundled environment loads")
}
