//! Experiment runner behind the `iwip` binary.
//!
//! A TOML file names one experiment, the map and observable, and numeric
//! parameters. The runner writes CSV and JSON artifacts into `output_dir`,
//! appends a line to `output_dir/results.jsonl` and maps the outcome to an
//! exit code: 0 when every check passes, 1 when one fails, 2 on a
//! configuration or runtime error.

mod config;
mod experiments;
mod ledger;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

pub use config::{
    BasisChoice, CorrelationChoice, ExperimentConfig, ExperimentKind, MapSpec, ObservableSpec,
    Params,
};
pub use experiments::Outcome;
pub use ledger::{experiment_id, LedgerEntry, LEDGER_FILE};

use crate::error::Result;

/// Verdicts and payload of the latest run, inside `output_dir`.
pub const REPORT_FILE: &str = "report.json";

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "iwip",
    version,
    about = "Run a martingale-coboundary experiment from a TOML config"
)]
pub struct Cli {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, value_name = "K")]
    pub threads: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the experiment catalog.
    List,
}

struct CatalogEntry {
    kind: ExperimentKind,
    params: &'static str,
    anchor: &'static str,
}

const CATALOG: [CatalogEntry; 8] = [
    CatalogEntry {
        kind: ExperimentKind::DiagnoseGordin,
        params: "map, observable, grid, n_max",
        anchor: "Gordin criterion: summability of |P^n v|_1, with |P^n v|_1 ~ n^-(1/gamma - 1) for LSV; hybrid L1/L2 series for baker maps",
    },
    CatalogEntry {
        kind: ExperimentKind::Decompose,
        params: "map, observable, grid, truncation",
        anchor: "martingale-coboundary decomposition v = m + chi o T - chi with P m = 0 (E_{-1} m = 0 for baker maps)",
    },
    CatalogEntry {
        kind: ExperimentKind::Wip,
        params: "map, observable, n, replicas, lags",
        anchor: "weak invariance principle: W_n(1) is asymptotically N(0, Sigma)",
    },
    CatalogEntry {
        kind: ExperimentKind::IteratedWip,
        params: "map, observable, n, replicas, lags, horizon",
        anchor: "iterated WIP: (W_n, WW_n) -> (W, int W (x) dW + t E); degenerate Sigma for coboundaries",
    },
    CatalogEntry {
        kind: ExperimentKind::Sigma,
        params: "map, observable, n, replicas, lags, grid, truncation",
        anchor: "Sigma = int m (x) m dmu = Green-Kubo lag sum = lim Cov W_n(1)",
    },
    CatalogEntry {
        kind: ExperimentKind::Homogenise,
        params: "map, observable (2-d), epsilon, replicas, sde_replicas, drift, convention",
        anchor: "homogenisation of fast-slow systems: the limit SDE drift is corrected by the iterated-integral drift E",
    },
    CatalogEntry {
        kind: ExperimentKind::InequalitySuite,
        params: "map, observable, n, replicas, grid",
        anchor: "maximal inequalities: Rio-type bound 128 n |v|_inf sum_j |P^j v|_1 and Doob bound 4 sqrt(n) |m|_2",
    },
    CatalogEntry {
        kind: ExperimentKind::Robustness,
        params: "map, observable, n, replicas, nu_lo, nu_hi",
        anchor: "strong distributional convergence (Zweimuller): the limit law is unchanged for absolutely continuous initial laws",
    },
];

/// The catalog printed by `iwip list`: one line per experiment.
pub fn list_experiments() -> String {
    let mut out = String::new();
    for e in &CATALOG {
        out.push_str(&format!(
            "{:<17} params: {}\n{:<17} anchor: {}\n",
            e.kind.name(),
            e.params,
            "",
            e.anchor
        ));
    }
    out
}

/// Runs the experiment in `cfg`, writing artifacts and a ledger line.
pub fn run_config(cfg: &ExperimentConfig) -> Result<LedgerEntry> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut ctx = experiments::Context::new(cfg)?;
    let outcome = experiments::dispatch(&mut ctx)?;
    let mut artifacts = ctx.artifacts().to_vec();
    let report_name = REPORT_FILE.to_string();
    experiments::write_json(
        &cfg.output_dir.join(&report_name),
        &serde_json::json!({
            "experiment": cfg.experiment,
            "verdicts": outcome.verdicts,
            "payload": outcome.payload,
        }),
    )?;
    artifacts.push(report_name);
    let entry = LedgerEntry {
        experiment_id: experiment_id(cfg),
        experiment: cfg.experiment.to_string(),
        config: cfg.clone(),
        passed: outcome.verdicts.iter().all(|r| r.passed),
        verdicts: outcome.verdicts,
        artifacts,
        payload: outcome.payload,
        started_unix,
        wall_clock_s: clock.elapsed().as_secs_f64(),
    };
    ledger::append(&cfg.output_dir, &entry)?;
    Ok(entry)
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| crate::Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

/// Parses arguments, runs, prints one line per verdict and returns the exit code.
pub fn main_with(cli: Cli) -> ExitCode {
    if let Some(Command::List) = cli.command {
        print!("{}", list_experiments());
        return ExitCode::from(EXIT_PASS);
    }
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: cannot start {k} worker threads: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let entry = match effective_config(&cli).and_then(|cfg| run_config(&cfg)) {
        Ok(entry) => entry,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    for r in &entry.verdicts {
        let detail = match (r.p_value, r.threshold) {
            (Some(p), _) => format!("p = {p:.4}"),
            (None, Some(t)) => format!("{:.4e} vs {t:.4e}", r.statistic),
            (None, None) => format!("{:.4e}", r.statistic),
        };
        println!(
            "{} {} {detail}",
            if r.passed { "PASS" } else { "FAIL" },
            r.test_name
        );
    }
    println!(
        "{} {} in {:.1}s",
        entry.experiment_id,
        if entry.passed { "passed" } else { "failed" },
        entry.wall_clock_s
    );
    ExitCode::from(if entry.passed { EXIT_PASS } else { EXIT_FAIL })
}

pub fn main() -> ExitCode {
    main_with(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lists_every_experiment_once() {
        let text = list_experiments();
        for kind in ExperimentKind::ALL {
            let lines = text
                .lines()
                .filter(|l| l.starts_with(&format!("{} ", kind.name())))
                .count();
            assert_eq!(lines, 1, "{kind}");
        }
        assert_eq!(text.matches("anchor: ").count(), 8);
        assert_eq!(text, list_experiments());
    }

    #[test]
    fn cli_flags_parse() {
        let cli = Cli::try_parse_from([
            "iwip",
            "--config",
            "a.toml",
            "--seed",
            "9",
            "--threads",
            "2",
            "--out",
            "o",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(9));
        assert_eq!(cli.threads, Some(2));
        assert!(matches!(
            Cli::try_parse_from(["iwip", "list"]).unwrap().command,
            Some(Command::List)
        ));
        assert!(Cli::try_parse_from(["iwip", "--seed", "x"]).is_err());
    }
}
