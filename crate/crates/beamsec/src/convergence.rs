//! Convergence traces of the solver loops at each configured SNR.

use std::time::Instant;

use beamsec_core::channel::CouplingMatrix;
use beamsec_core::optimizer::{cccp_solve_traced, LogBase};
use beamsec_core::trace::{LoopId, TraceRow, TraceSink};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::io::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub snr_db: f64,
    pub loop_id: LoopId,
    /// Strictly increasing per loop id within one SNR point.
    pub iteration: u64,
    /// Enclosing CCCP iteration.
    pub outer: u64,
    /// Counter inside the enclosing loop.
    pub inner: u64,
    /// Objective (cccp: bound, iwfa: surrogate) in the configured log base;
    /// fixed-point residual for de-fixed-point rows.
    pub value: f64,
    pub kkt_residual_max: Option<f64>,
    pub power_used: Option<f64>,
    pub mu: Option<f64>,
    /// Seconds since the solve started.
    pub wall_time: f64,
}

struct Timed<'a> {
    snr_db: f64,
    loops: &'a [LoopId],
    base: LogBase,
    start: Instant,
    rows: Vec<ConvergenceRow>,
}

impl TraceSink for Timed<'_> {
    fn record(&mut self, row: TraceRow) {
        if !self.enabled(row.loop_id) {
            return;
        }
        let value = match row.loop_id {
            LoopId::DeFixedPoint => row.value,
            _ => self.base.from_bits(row.value),
        };
        self.rows.push(ConvergenceRow {
            snr_db: self.snr_db,
            loop_id: row.loop_id,
            iteration: row.iteration,
            outer: row.outer,
            inner: row.inner,
            value,
            kkt_residual_max: row.kkt_residual_max,
            power_used: row.power_used,
            mu: row.mu,
            wall_time: self.start.elapsed().as_secs_f64(),
        });
    }

    fn enabled(&self, loop_id: LoopId) -> bool {
        self.loops.contains(&loop_id)
    }
}

fn non_finite(rows: &[ConvergenceRow]) -> Option<String> {
    rows.iter().find_map(|r| {
        let bad = !r.value.is_finite()
            || r.kkt_residual_max.is_some_and(|v| !v.is_finite())
            || r.power_used.is_some_and(|v| !v.is_finite())
            || r.mu.is_some_and(|v| !v.is_finite());
        bad.then(|| format!("non-finite value in {} row {}", r.loop_id.as_str(), r.iteration))
    })
}

/// Traces every SNR point on the current rayon pool. Points whose solve
/// fails (or produces a non-finite value) contribute no rows and a failure.
pub fn run_convergence(cfg: &ScenarioConfig, omegas: &[CouplingMatrix], eve: &CouplingMatrix) -> (Vec<ConvergenceRow>, Vec<Failure>) {
    let results: Vec<Result<Vec<ConvergenceRow>, Failure>> = cfg
        .snr_grid
        .par_iter()
        .map(|&snr_db| {
            let solver = cfg.solver_at(snr_db);
            let mut sink = Timed {
                snr_db,
                loops: &cfg.convergence.loops,
                base: solver.log_base,
                start: Instant::now(),
                rows: Vec::new(),
            };
            let fail = |error: String| Failure {
                snr_db: Some(snr_db),
                error,
            };
            cccp_solve_traced(omegas, eve, &solver, &mut sink).map_err(|e| fail(e.to_string()))?;
            match non_finite(&sink.rows) {
                Some(e) => Err(fail(e)),
                None => Ok(sink.rows),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => rows.extend(v),
            Err(f) => failures.push(f),
        }
    }
    (rows, failures)
}
