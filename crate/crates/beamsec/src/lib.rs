//! Scenario runner around `beamsec-core`: configuration, parallel
//! Monte-Carlo, artifact writing and the command implementations behind the
//! `beamsec` binary.

pub mod bench;
pub mod config;
pub mod convergence;
pub mod error;
pub mod grid;
pub mod instances;
pub mod io;
pub mod mc;
pub mod solve;
pub mod sweep;
pub mod verify;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::ScenarioConfig;
pub use error::RunError;

use crate::io::{ArtifactWriter, Failure, Sidecar};

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// Names the first non-finite field, if any.
pub fn check_finite(fields: &[(&str, Option<f64>)]) -> Result<(), String> {
    match fields.iter().find(|(_, v)| v.is_some_and(|x| !x.is_finite())) {
        Some((name, v)) => Err(format!("non-finite {name}: {}", v.unwrap_or(f64::NAN))),
        None => Ok(()),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Config(format!("workers: {e}")))?;
    Ok(pool.install(f))
}

fn failures_to_result(command: &str, failures: &[Failure]) -> Result<(), RunError> {
    if failures.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = failures
        .iter()
        .map(|f| match f.snr_db {
            Some(s) => format!("{s} dB: {}", f.error),
            None => f.error.clone(),
        })
        .collect();
    Err(RunError::Solver(format!("{command}: {} point(s) failed; {}", failures.len(), list.join("; "))))
}

fn writer(cfg: &ScenarioConfig) -> Result<ArtifactWriter, RunError> {
    ArtifactWriter::new(&cfg.outputs.dir, cfg.outputs.format)
}

pub fn cmd_solve(cfg: &ScenarioConfig, workers: usize) -> Result<(), RunError> {
    let (omegas, eve) = cfg.coupling()?;
    let (records, failures) = with_workers(workers, || solve::run_solve(cfg, &omegas, &eve))?;
    let mut w = writer(cfg)?;
    let rows: Vec<_> = records.iter().map(|r| r.row()).collect();
    let alloc: Vec<_> = records.iter().flat_map(|r| r.allocation_rows()).collect();
    w.table("solve", &rows)?;
    w.table("allocation", &alloc)?;
    let mut side = Sidecar::new("solve", cfg, workers);
    side.summary = json!({ "points": cfg.snr_grid.len(), "solved": records.len() });
    side.failures = failures.clone();
    w.finish(side)?;
    failures_to_result("solve", &failures)
}

pub fn cmd_sweep(cfg: &ScenarioConfig, workers: usize) -> Result<(), RunError> {
    let (omegas, eve) = cfg.coupling()?;
    let out = with_workers(workers, || sweep::run_sweep(cfg, &omegas, &eve))?;
    let mut w = writer(cfg)?;
    w.table("sweep", &out.rows)?;
    w.table("rates", &out.rates)?;
    let failures: Vec<Failure> = out
        .rows
        .iter()
        .filter(|r| r.status == RowStatus::Failed)
        .map(|r| Failure {
            snr_db: Some(r.snr_db),
            error: r.error.clone().unwrap_or_default(),
        })
        .collect();
    let mut side = Sidecar::new("sweep", cfg, workers);
    side.summary = json!({ "points": out.rows.len(), "failed": failures.len() });
    side.failures = failures.clone();
    w.finish(side)?;
    failures_to_result("sweep", &failures)
}

pub fn cmd_convergence(cfg: &ScenarioConfig, workers: usize) -> Result<(), RunError> {
    let (omegas, eve) = cfg.coupling()?;
    let (rows, failures) = with_workers(workers, || convergence::run_convergence(cfg, &omegas, &eve))?;
    let mut w = writer(cfg)?;
    w.table("convergence", &rows)?;
    let mut side = Sidecar::new("convergence", cfg, workers);
    side.summary = json!({ "rows": rows.len() });
    side.failures = failures.clone();
    w.finish(side)?;
    failures_to_result("convergence", &failures)
}

/// Writes `verify.json`; fails with a verification error when any suite fails.
pub fn cmd_verify(cfg: &ScenarioConfig, workers: usize) -> Result<verify::VerifyReport, RunError> {
    let report = with_workers(workers, || verify::run_verify(cfg))?;
    let mut w = writer(cfg)?;
    w.json("verify.json", &report)?;
    let mut side = Sidecar::new("verify", cfg, workers);
    side.summary = json!({
        "passed": report.passed,
        "suites": report.suites.iter().map(|s| json!({ "name": s.name, "passed": s.passed, "summary": s.summary })).collect::<Vec<_>>(),
    });
    w.finish(side)?;
    if report.passed {
        Ok(report)
    } else {
        let failed: Vec<String> = report
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| format!("{} ({})", s.name, s.summary))
            .collect();
        Err(RunError::Verification(failed.join("; ")))
    }
}

/// Bench cells run one at a time; `workers` is recorded but not used.
pub fn cmd_bench(cfg: &ScenarioConfig, workers: usize) -> Result<bench::BenchSummary, RunError> {
    let (rows, failures) = bench::run_bench(cfg);
    let summary = bench::summarize(&rows);
    let mut w = writer(cfg)?;
    w.table("bench", &rows)?;
    let mut side = Sidecar::new("bench", cfg, workers);
    side.summary = serde_json::to_value(&summary).map_err(|e| RunError::io("bench summary", e))?;
    side.failures = failures.clone();
    w.finish(side)?;
    failures_to_result("bench", &failures)?;
    Ok(summary)
}
