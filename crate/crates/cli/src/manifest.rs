use std::path::Path;
use std::process::Command;

use serde::Serialize;
use serde_json::Value;

use knpemi::error::Error;
use knpemi::output::write_text;

/// Run metadata written next to the outputs as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub wall_time_s: f64,
    /// The scenario as TOML; reloads to an equal config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    pub summary: Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(&dir.join("manifest.json"), &(text + "\n"))
    }
}

/// `git describe` of the source tree when available, else the crate version.
pub fn version() -> String {
    let described = Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{}+{d}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}
