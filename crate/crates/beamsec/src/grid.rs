//! Solving every point of the SNR grid.
//!
//! Points are first solved independently in parallel. A sequential pass in
//! ascending SNR then re-solves any point whose bound falls below that of a
//! lower-SNR point, warm-started from that point's allocation: the budget is
//! an inequality, so the lower-power allocation stays feasible and CCCP can
//! only improve on it. The better of the two solutions is kept.

use std::time::Instant;

use beamsec_core::channel::CouplingMatrix;
use beamsec_core::optimizer::{cccp_solve_traced, CccpSolution, InitStrategy, SolverConfig};
use beamsec_core::trace::NoTrace;
use rayon::prelude::*;

use crate::config::ScenarioConfig;

pub struct GridPoint {
    pub snr_db: f64,
    pub solver: SolverConfig,
    pub result: Result<CccpSolution, String>,
    /// The kept solution came from the continuation pass.
    pub warm_started: bool,
    /// Seconds spent solving, both passes included.
    pub solve_time: f64,
}

/// Points in `snr_grid` order.
pub fn solve_grid(cfg: &ScenarioConfig, omegas: &[CouplingMatrix], eve: &CouplingMatrix) -> Vec<GridPoint> {
    let mut points: Vec<GridPoint> = cfg
        .snr_grid
        .par_iter()
        .map(|&snr_db| {
            let solver = cfg.solver_at(snr_db);
            let start = Instant::now();
            let result = cccp_solve_traced(omegas, eve, &solver, &mut NoTrace).map_err(|e| e.to_string());
            GridPoint {
                snr_db,
                solver,
                result,
                warm_started: false,
                solve_time: start.elapsed().as_secs_f64(),
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].snr_db.total_cmp(&points[b].snr_db));
    let mut best: Option<(f64, f64, Vec<Vec<f64>>)> = None;
    for i in order {
        let pt = &mut points[i];
        let Ok(sol) = &pt.result else { continue };
        if let Some((obj, p, lambdas)) = &best {
            if *obj > sol.state.objective && *p <= pt.solver.p {
                let start = Instant::now();
                let warm = SolverConfig {
                    init: InitStrategy::Custom { lambdas: lambdas.clone() },
                    ..pt.solver.clone()
                };
                if let Ok(w) = cccp_solve_traced(omegas, eve, &warm, &mut NoTrace) {
                    if w.state.objective > sol.state.objective {
                        pt.result = Ok(w);
                        pt.warm_started = true;
                    }
                }
                pt.solve_time += start.elapsed().as_secs_f64();
            }
        }
        let sol = pt.result.as_ref().expect("checked above");
        if best.as_ref().is_none_or(|(obj, _, _)| sol.state.objective > *obj) {
            let lambdas = (0..sol.alloc.users()).map(|k| sol.alloc.user(k).to_vec()).collect();
            best = Some((sol.state.objective, pt.solver.p, lambdas));
        }
    }
    points
}
