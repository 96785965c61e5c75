use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use reactmix::compactness::{fit_envelope_offset, log_gronwall_envelope, CompactnessFunctional};
use reactmix::io::read_snapshot;
use reactmix::mixture::DensityField;
use reactmix::spectral::SpectralGrid;

use crate::error::CliError;

/// Largest offset constant tried when fitting the envelope.
const ENVELOPE_C_MAX: f64 = 1e3;

fn snapshot_paths(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let paths = glob::glob(pattern)
        .map_err(|e| CliError::Usage(format!("bad snapshot pattern {pattern:?}: {e}")))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("cannot read {}: {}", e.path().display(), e.error())))?;
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no snapshots match {pattern:?}")));
    }
    Ok(paths)
}

/// Named fields of a snapshot: every component, then the total density.
fn targets(state: &DensityField) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = (0..state.n_components())
        .map(|i| (format!("rho_{}", i + 1), state.component(i).to_vec()))
        .collect();
    out.push(("total".into(), state.total_density()));
    out
}

pub fn cmd_compact(pattern: &str, h_values: &[f64], envelope: bool, out: Option<&Path>) -> Result<(), CliError> {
    if h_values.is_empty() {
        return Err(CliError::Usage("at least one kernel width is required".into()));
    }
    let mut states = snapshot_paths(pattern)?
        .iter()
        .map(|p| read_snapshot(p))
        .collect::<Result<Vec<_>, _>>()?;
    states.sort_by(|a, b| a.time.total_cmp(&b.time));
    let m = states[0].grid_size();
    let n = states[0].n_components();
    if let Some(s) = states.iter().find(|s| s.grid_size() != m || s.n_components() != n) {
        return Err(CliError::Usage(format!(
            "snapshot at t = {} has shape {}x{}, expected {n}x{m}",
            s.time,
            s.n_components(),
            s.grid_size()
        )));
    }
    let grid = SpectralGrid::new(m).map_err(|e| CliError::Usage(format!("snapshot grid: {e}")))?;
    let functionals = h_values
        .iter()
        .map(|&h| CompactnessFunctional::new(&grid, h))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    // values[h][target][snapshot]
    let names: Vec<String> = targets(&states[0]).into_iter().map(|(name, _)| name).collect();
    let mut values = vec![vec![Vec::with_capacity(states.len()); names.len()]; h_values.len()];
    for state in &states {
        for (k, (_, field)) in targets(state).iter().enumerate() {
            for (j, f) in functionals.iter().enumerate() {
                values[j][k].push(f.evaluate(field));
            }
        }
    }
    let t0 = states[0].time;
    let times: Vec<f64> = states.iter().map(|s| s.time - t0).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t", "h", "field", "R_h"];
    if envelope {
        header.extend(["envelope", "offset"]);
    }
    let write_err = |e: csv::Error| CliError::output("<csv>", e);
    w.write_record(&header).map_err(write_err)?;
    for (j, &h) in h_values.iter().enumerate() {
        for (k, name) in names.iter().enumerate() {
            let series = &values[j][k];
            let fitted = if envelope {
                let c = fit_envelope_offset(&times, series, h, ENVELOPE_C_MAX);
                c.map(|c| (c, log_gronwall_envelope(series[0], c / h.ln().abs(), times[times.len() - 1])))
            } else {
                None
            };
            for (s, state) in states.iter().enumerate() {
                let mut row = vec![format!("{:e}", state.time), format!("{h:e}"), name.clone(), format!("{:e}", series[s])];
                if envelope {
                    match &fitted {
                        Some((c, env)) => {
                            row.push(format!("{:e}", env.eval(times[s])));
                            row.push(format!("{c:e}"));
                        }
                        None => row.extend(["NaN".to_string(), "NaN".to_string()]),
                    }
                }
                w.write_record(&row).map_err(write_err)?;
            }
        }
    }
    let buf = w.into_inner().map_err(|e| CliError::output("<csv>", e.error()))?;
    match out {
        Some(path) => fs::write(path, &buf).map_err(|e| CliError::output(path, e)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::output("<stdout>", e)),
    }
}
