//! Complexity benchmark: solver wall time per CCCP iteration over a grid of
//! `(K, M)` cells.

use std::time::Instant;

use beamsec_core::channel::{synth_coupling, ProfileParams, ProfileSpec, SystemDims};
use beamsec_core::optimizer::cccp_solve_traced;
use beamsec_core::trace::{LoopId, TraceRow, TraceSink};
use serde::{Deserialize, Serialize};

use crate::config::{CouplingSource, ScenarioConfig};
use crate::io::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub k: usize,
    pub m: usize,
    pub km: usize,
    /// CCCP iterations `L`.
    pub iterations: usize,
    pub converged: bool,
    /// Water-filling sweeps summed over all CCCP iterations.
    pub iwfa_sweeps: usize,
    /// Fastest of the repeats, seconds.
    pub wall_time: f64,
    pub per_iteration: f64,
    /// Wall time per water-filling sweep, for separating the growth of the
    /// sweep count from the cost of one sweep.
    pub per_sweep: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    /// Least-squares slope of `ln per_iteration` against `ln KM`.
    pub slope: Option<f64>,
    /// The same fit for `per_sweep`.
    pub slope_per_sweep: Option<f64>,
    /// Per-iteration time ratio between consecutive `M` at fixed `K`
    /// (only for exact doublings).
    pub doubling_factors: Vec<DoublingFactor>,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingFactor {
    pub k: usize,
    pub m: usize,
    pub factor: f64,
}

#[derive(Default)]
struct SweepCounter(usize);

impl TraceSink for SweepCounter {
    fn record(&mut self, _row: TraceRow) {
        self.0 += 1;
    }

    fn enabled(&self, loop_id: LoopId) -> bool {
        loop_id == LoopId::Iwfa
    }
}

/// Least-squares slope of `ys` on `xs`; `None` with fewer than two distinct `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn summarize(rows: &[BenchRow]) -> BenchSummary {
    let fit = |y: fn(&BenchRow) -> f64| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| y(r) > 0.0)
            .map(|r| ((r.km as f64).ln(), y(r).ln()))
            .unzip();
        fit_slope(&xs, &ys)
    };
    let mut doubling_factors = Vec::new();
    for r in rows {
        if let Some(next) = rows.iter().find(|s| s.k == r.k && s.m == 2 * r.m) {
            if r.per_iteration > 0.0 {
                doubling_factors.push(DoublingFactor {
                    k: r.k,
                    m: r.m,
                    factor: next.per_iteration / r.per_iteration,
                });
            }
        }
    }
    BenchSummary {
        slope: fit(|r| r.per_iteration),
        slope_per_sweep: fit(|r| r.per_sweep),
        doubling_factors,
        max_iterations: rows.iter().map(|r| r.iterations).max().unwrap_or(0),
    }
}

/// Times every cell sequentially, so cells do not compete for cores.
///
/// Instances come from the configured profile (seeded as configured) at the
/// cell's `(K, M)` and the configured antenna counts; file-based couplings
/// fall back to the default exponential-cluster profile.
pub fn run_bench(cfg: &ScenarioConfig) -> (Vec<BenchRow>, Vec<Failure>) {
    let spec = match &cfg.coupling {
        CouplingSource::Profile(p) => p.clone(),
        CouplingSource::Files { .. } => ProfileSpec::new("exponential-cluster", ProfileParams::default(), cfg.seed),
    };
    let solver = cfg.solver_at(cfg.bench.snr_db);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &k in &cfg.bench.ks {
        for &m in &cfg.bench.ms {
            let cell = || -> beamsec_core::Result<BenchRow> {
                let dims = SystemDims::new(m, k, cfg.dims.n_r, cfg.dims.n_e, solver.p)?;
                let (omegas, eve) = synth_coupling(&dims, &spec)?;
                let mut best = f64::INFINITY;
                let mut out = None;
                for _ in 0..cfg.bench.repeats {
                    let mut sweeps = SweepCounter::default();
                    let start = Instant::now();
                    let sol = cccp_solve_traced(&omegas, &eve, &solver, &mut sweeps)?;
                    best = best.min(start.elapsed().as_secs_f64());
                    out = Some((sol.iterations, sol.converged, sweeps.0));
                }
                let (iterations, converged, iwfa_sweeps) = out.expect("repeats >= 1");
                Ok(BenchRow {
                    k,
                    m,
                    km: k * m,
                    iterations,
                    converged,
                    iwfa_sweeps,
                    wall_time: best,
                    per_iteration: best / iterations.max(1) as f64,
                    per_sweep: best / iwfa_sweeps.max(1) as f64,
                })
            };
            match cell() {
                Ok(r) => rows.push(r),
                Err(e) => failures.push(Failure {
                    snr_db: Some(cfg.bench.snr_db),
                    error: format!("K={k} M={m}: {e}"),
                }),
            }
        }
    }
    (rows, failures)
}
