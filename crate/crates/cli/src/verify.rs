use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use reactmix::check::{run_case, summarize, Invariant};
use reactmix::entropy::matrix_b;
use reactmix::io::write_oracle_csv;
use reactmix::oracle::suite::registry;

use crate::error::CliError;

pub fn cmd_check(seed: u64, n_cases: u64) -> Result<(), CliError> {
    let jobs: Vec<(Invariant, u64)> = Invariant::ALL
        .iter()
        .flat_map(|&inv| (0..n_cases).map(move |i| (inv, i)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(inv, i)| run_case(inv, seed, i, matrix_b))
        .collect();
    let summary = summarize(&outcomes, &Invariant::ALL);

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut table = format!(
        "{:<24} {:>6} {:>12} {:>12}  {}\n",
        "invariant", "cases", "worst", "tolerance", "status"
    );
    for s in summary.iter().filter(|s| s.cases > 0) {
        table += &format!(
            "{:<24} {:>6} {:>12.3e} {:>12.3e}  {}\n",
            s.invariant.name(),
            s.cases,
            s.worst,
            s.tolerance,
            if s.passed() { "pass" } else { "FAIL" }
        );
    }
    out.write_all(table.as_bytes())
        .map_err(|e| CliError::output("<stdout>", e))?;

    let failing: Vec<String> = summary
        .iter()
        .filter(|s| !s.passed())
        .map(|s| {
            let idx: Vec<String> = s.failures.iter().map(u64::to_string).collect();
            format!("{} (seed {seed}, cases {})", s.invariant.name(), idx.join(" "))
        })
        .collect();
    for o in outcomes.iter().filter(|o| o.detail.is_some()) {
        log::warn!("{} case {}: {}", o.invariant, o.index, o.detail.as_deref().unwrap_or_default());
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failing.join("; ")))
    }
}

pub fn cmd_oracle(tolerance: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    if let Some(t) = tolerance {
        if !(t >= 0.0) {
            return Err(CliError::Usage(format!("tolerance must be non-negative, got {t}")));
        }
    }
    let cases = registry();
    let outcomes: Vec<_> = cases.par_iter().map(|c| c.evaluate(tolerance)).collect();
    let mut buf = Vec::new();
    write_oracle_csv(&mut buf, &outcomes).map_err(|e| CliError::output("<csv>", e))?;
    match out {
        Some(path) => fs::write(path, &buf).map_err(|e| CliError::output(path, e))?,
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::output("<stdout>", e))?,
    }
    let failing: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| match &o.failure {
            Some(msg) => format!("{} ({msg})", o.report.case),
            None => o.report.case.clone(),
        })
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} of {} oracle cases outside tolerance: {}",
            failing.len(),
            outcomes.len(),
            failing.join(", ")
        )))
    }
}
