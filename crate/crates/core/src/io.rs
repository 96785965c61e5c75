//! Configuration documents, snapshots and run outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsReport;
use crate::error::IoError;
use crate::mixture::{ComponentFields, DensityField};
use crate::oracle::suite::OracleOutcome;
use crate::solver::{RunOutcome, SimConfig};

pub const SCHEMA_VERSION: u64 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses a configuration document: a JSON object holding `schema_version`
/// next to the fields of [`SimConfig`].
pub fn parse_config(text: &str) -> Result<SimConfig, IoError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = doc.as_object_mut().ok_or_else(|| IoError::Field {
        field: "<root>".into(),
        reason: "expected a JSON object".into(),
    })?;
    match obj.remove("schema_version") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(IoError::Field {
                field: "schema_version".into(),
                reason: format!("unsupported version {other}, expected {SCHEMA_VERSION}"),
            })
        }
        None => {
            return Err(IoError::Field {
                field: "schema_version".into(),
                reason: "missing".into(),
            })
        }
    }
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let field = e.path().to_string();
        IoError::Field {
            field: if field == "." { "<root>".into() } else { field },
            reason: e.into_inner().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<SimConfig, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

/// Pretty-printed configuration document for `config`.
pub fn config_document(config: &SimConfig) -> String {
    let mut value = serde_json::to_value(config).expect("configs serialize");
    if let Value::Object(map) = &mut value {
        map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    }
    serde_json::to_string_pretty(&value).expect("values serialize")
}

/// SHA-256 of the canonical serialization of `config`, in hex.
pub fn config_hash(config: &SimConfig) -> String {
    let canonical = serde_json::to_vec(config).expect("configs serialize");
    let mut hasher = Sha256::new();
    hasher.update(SCHEMA_VERSION.to_le_bytes());
    hasher.update(&canonical);
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    t: f64,
}

/// One JSON header line, then the densities as little-endian `f64`, component-major.
pub fn write_snapshot(path: &Path, state: &DensityField) -> Result<(), IoError> {
    let header = SnapshotHeader {
        n: state.n_components(),
        m: state.grid_size(),
        t: state.time,
    };
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let line = serde_json::to_string(&header).expect("headers serialize");
    out.write_all(line.as_bytes()).map_err(io_err(path))?;
    out.write_all(b"\n").map_err(io_err(path))?;
    for v in state.fields.as_slice() {
        out.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<DensityField, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    let bad = |reason: String| IoError::Snapshot {
        path: path.display().to_string(),
        reason,
    };
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| bad(format!("header: {e}")))?;
    let body = &bytes[split + 1..];
    let expected = header.n * header.m * 8;
    if body.len() != expected {
        return Err(bad(format!(
            "expected {expected} data bytes for N = {}, M = {}, found {}",
            header.n,
            header.m,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks have eight bytes")))
        .collect();
    let fields = ComponentFields::from_flat(header.n, header.m, data).map_err(|e| bad(e.to_string()))?;
    Ok(DensityField::new(fields, header.t))
}

/// Diagnostics rows with a header, in the fixed column order.
pub fn write_diagnostics_csv<W: Write>(out: W, report: &DiagnosticsReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(crate::diagnostics::DiagnosticsRecord::header(
        report.n_components,
        &report.h_values,
    ))?;
    for r in &report.records {
        w.write_record(r.values())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oracle_csv<W: Write>(out: W, outcomes: &[OracleOutcome]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "computed", "reference", "abs_error", "rel_error", "tolerance", "passed"])?;
    for o in outcomes {
        let r = &o.report;
        w.write_record([
            r.case.clone(),
            format!("{:e}", r.computed),
            format!("{:e}", r.reference),
            format!("{:e}", r.abs_error),
            format!("{:e}", r.rel_error),
            format!("{:e}", o.tolerance),
            o.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Pass,
    Warn,
}

/// A measured quantity compared against its acceptance threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryCheck {
    pub value: f64,
    pub threshold: f64,
    pub flag: Flag,
}

impl SummaryCheck {
    fn at_most(value: f64, threshold: f64) -> Self {
        let flag = if value <= threshold { Flag::Pass } else { Flag::Warn };
        Self { value, threshold, flag }
    }

    fn at_least(value: f64, threshold: f64) -> Self {
        let flag = if value >= threshold { Flag::Pass } else { Flag::Warn };
        Self { value, threshold, flag }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

/// Final JSON summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub completed: bool,
    pub error: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub columns: BTreeMap<String, ColumnRange>,
    pub checks: BTreeMap<String, SummaryCheck>,
    pub all_pass: bool,
}

/// Relative mass balance, including mass removed by damping, required of every run.
pub const MASS_TOLERANCE: f64 = 1e-8;

impl RunSummary {
    pub fn new(config: &SimConfig, outcome: &RunOutcome) -> Self {
        let report = &outcome.report;
        let ex = &report.extremes;
        let opts = &config.diagnostics;
        let mut checks = BTreeMap::new();
        checks.insert("mass_balance".into(), SummaryCheck::at_most(report.leak_defect(), MASS_TOLERANCE));
        checks.insert(
            "energy_residual".into(),
            SummaryCheck::at_most(ex.max_scaled_energy_residual, opts.energy_tolerance),
        );
        checks.insert(
            "effective_viscous_flux".into(),
            SummaryCheck::at_most(ex.max_evf_residual, opts.evf_tolerance),
        );
        let relative_min = if ex.max_density > 0.0 {
            ex.min_density / ex.max_density
        } else {
            ex.min_density
        };
        checks.insert(
            "non_negativity".into(),
            SummaryCheck::at_least(relative_min, -opts.positivity_tolerance),
        );
        checks.insert(
            "finite_rows".into(),
            SummaryCheck::at_most(if report.is_well_formed() { 0.0 } else { 1.0 }, 0.0),
        );
        if config.lower_bound.is_some() {
            checks.insert(
                "lower_bound".into(),
                SummaryCheck::at_most(ex.lower_bound_violations as f64, 0.0),
            );
        }
        let columns = report
            .column_ranges()
            .into_iter()
            .map(|(name, min, max)| (name, ColumnRange { min, max }))
            .collect();
        let completed = outcome.error.is_none();
        let all_pass = completed && checks.values().all(|c| c.flag == Flag::Pass);
        Self {
            config_hash: config_hash(config),
            completed,
            error: outcome.error.as_ref().map(|e| e.to_string()),
            steps: ex.steps,
            t_final: outcome.state.time,
            columns,
            checks,
            all_pass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{MixtureParams, ReactionNetwork};
    use crate::solver::InitialProfile;

    fn sample_config() -> SimConfig {
        let params = MixtureParams::new(vec![2.0; 3], vec![1.0; 3]);
        let init = vec![InitialProfile::Constant { value: 1.0 }; 3];
        SimConfig::new(16, params, ReactionNetwork::abc(1.0, 1.0), init, 0.0)
    }

    #[test]
    fn config_document_round_trips() {
        let c = sample_config();
        let parsed = parse_config(&config_document(&c)).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(config_hash(&parsed), config_hash(&c));
    }

    #[test]
    fn hash_changes_with_config() {
        let a = sample_config();
        let mut b = a.clone();
        b.t_end = 1.0;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("{\n  \"schema_version\": 1,\n  \"grid_size\": ,\n}").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn field_errors_name_the_field() {
        let mut doc: Value = serde_json::from_str(&config_document(&sample_config())).unwrap();
        doc["params"]["gamma"] = Value::from("two");
        match parse_config(&doc.to_string()).unwrap_err() {
            IoError::Field { field, .. } => assert_eq!(field, "params.gamma"),
            e => panic!("{e}"),
        }
        doc = serde_json::from_str(&config_document(&sample_config())).unwrap();
        doc.as_object_mut().unwrap().remove("schema_version");
        assert!(matches!(parse_config(&doc.to_string()), Err(IoError::Field { .. })));
        doc["schema_version"] = Value::from(7);
        assert!(matches!(parse_config(&doc.to_string()), Err(IoError::Field { .. })));
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = std::env::temp_dir().join(format!("reactmix-snap-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.bin");
        let state = DensityField::from_components(vec![vec![1.0, -2.5, 3.0e-300], vec![0.0, 7.0, 1.0 / 3.0]], 0.25).unwrap();
        write_snapshot(&path, &state).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), state);
        fs::write(&path, b"{\"N\":2,\"M\":3,\"t\":0}\n1234").unwrap();
        assert!(matches!(read_snapshot(&path), Err(IoError::Snapshot { .. })));
        fs::remove_dir_all(&dir).unwrap();
    }
}
