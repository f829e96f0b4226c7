use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::rng::derive_seed;
use crate::stats::TestReport;

/// File inside `output_dir` that receives one JSON line per run.
pub const LEDGER_FILE: &str = "results.jsonl";

/// One run of one experiment.
#[derive(Clone, Debug, Serialize)]
pub struct LedgerEntry {
    /// `<experiment>-<16 hex digits>`, a hash of the effective configuration.
    pub experiment_id: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub verdicts: Vec<TestReport>,
    /// Paths relative to `output_dir`.
    pub artifacts: Vec<String>,
    pub payload: Value,
    pub started_unix: u64,
    pub wall_clock_s: f64,
}

/// Identifier shared by every run of the same effective configuration.
pub fn experiment_id(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).unwrap_or_default();
    format!(
        "{}-{:016x}",
        cfg.experiment,
        derive_seed(cfg.master_seed, &canonical)
    )
}

/// Appends `entry` as one line of `output_dir/results.jsonl`.
pub fn append(output_dir: &Path, entry: &LedgerEntry) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(output_dir.join(LEDGER_FILE))?;
    let line = serde_json::to_string(entry)?;
    writeln!(f, "{line}")?;
    Ok(())
}
