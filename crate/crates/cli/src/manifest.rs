use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One line of the append-only run log kept in each output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: String,
    pub output_dir: String,
    pub config_hash: Option<String>,
    pub started: String,
    pub finished: String,
    pub exit_status: u8,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn append(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::output(&path, e))?;
        let line = serde_json::to_string(self).expect("manifests serialize");
        writeln!(file, "{line}").map_err(|e| CliError::output(&path, e))
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
