//! Scenario files shipped with the crate, loadable by name.

use crate::config::ScenarioFile;
use crate::error::{Error, Result};
use crate::sim::Scenario;

pub const BUILTIN: [(&str, &str); 7] = [
    ("course", include_str!("../scenarios/course.toml")),
    ("course_full", include_str!("../scenarios/course_full.toml")),
    ("course_perfect", include_str!("../scenarios/course_perfect.toml")),
    ("stop", include_str!("../scenarios/stop.toml")),
    ("obstacle", include_str!("../scenarios/obstacle.toml")),
    ("straight", include_str!("../scenarios/straight.toml")),
    ("unstable", include_str!("../scenarios/unstable.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Builds a shipped scenario.
pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Invalid(format!("no built-in scenario `{name}`; have {}", builtin_names().join(", "))))?;
    let file = format!("{name}.toml");
    ScenarioFile::parse(text, &file)?.to_scenario(&file)
}
