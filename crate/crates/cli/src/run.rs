use std::fs;
use std::path::{Path, PathBuf};

use reactmix::io::{config_hash, load_config, write_diagnostics_csv, write_snapshot, RunSummary};
use reactmix::solver::{SimConfig, Solver};

use crate::error::CliError;
use crate::manifest::{timestamp, RunManifest};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

pub fn cmd_run(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::output(out_dir, e))?;
    let started = timestamp();
    let mut hash = None;
    let result = load_config(config_path)
        .map_err(CliError::from)
        .and_then(|config| {
            hash = Some(config_hash(&config));
            execute(config, out_dir)
        });
    let manifest = RunManifest {
        config_path: config_path.display().to_string(),
        output_dir: out_dir.display().to_string(),
        config_hash: hash,
        started,
        finished: timestamp(),
        exit_status: result.as_ref().err().map_or(0, CliError::exit_code),
        error: result.as_ref().err().map(ToString::to_string),
    };
    manifest.append(out_dir)?;
    result
}

fn execute(config: SimConfig, out_dir: &Path) -> Result<(), CliError> {
    let solver = Solver::new(config.clone()).map_err(CliError::Config)?;
    let snap_dir = out_dir.join(SNAPSHOT_DIR);
    if config.snapshot_every > 0 {
        fs::create_dir_all(&snap_dir).map_err(|e| CliError::output(&snap_dir, e))?;
    }
    let mut index = 0usize;
    let mut snapshot_error: Option<CliError> = None;
    let outcome = solver.run_with(|state| {
        if snapshot_error.is_some() {
            return;
        }
        let path: PathBuf = snap_dir.join(format!("snapshot_{index:06}.bin"));
        if let Err(e) = write_snapshot(&path, state) {
            snapshot_error = Some(e.into());
        }
        index += 1;
    });

    let csv_path = out_dir.join(DIAGNOSTICS_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| CliError::output(&csv_path, e))?;
    write_diagnostics_csv(file, &outcome.report).map_err(|e| CliError::output(&csv_path, e))?;

    let summary = RunSummary::new(&config, &outcome);
    let summary_path = out_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).expect("summaries serialize");
    fs::write(&summary_path, text + "\n").map_err(|e| CliError::output(&summary_path, e))?;

    if let Some(e) = snapshot_error {
        return Err(e);
    }
    for (name, check) in &summary.checks {
        if check.flag != reactmix::io::Flag::Pass {
            log::warn!("{name}: {:e} against threshold {:e}", check.value, check.threshold);
        }
    }
    match outcome.error {
        Some(e) => Err(CliError::Aborted(e)),
        None => Ok(()),
    }
}
