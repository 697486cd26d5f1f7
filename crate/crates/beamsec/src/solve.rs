//! Power allocation at each SNR point, without Monte-Carlo.

use beamsec_core::channel::CouplingMatrix;
use beamsec_core::optimizer::KktCertificate;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::grid::solve_grid;
use crate::io::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub snr_db: f64,
    pub p: f64,
    /// Deterministic-equivalent secrecy bound at the allocation, configured
    /// log base.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warm_started: bool,
    pub certificate: KktCertificate,
    /// `allocation[k][m]`.
    pub allocation: Vec<Vec<f64>>,
}

/// Flat summary row for CSV output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub snr_db: f64,
    pub p: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warm_started: bool,
    pub kkt_residual_max: f64,
    pub slackness: f64,
    pub power_used: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub snr_db: f64,
    pub k: usize,
    pub m: usize,
    pub lambda: f64,
}

impl SolveRecord {
    pub fn row(&self) -> SolveRow {
        SolveRow {
            snr_db: self.snr_db,
            p: self.p,
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
            warm_started: self.warm_started,
            kkt_residual_max: self.certificate.residual_max(),
            slackness: self.certificate.slackness,
            power_used: self.certificate.power_used,
            mu: self.certificate.mu,
        }
    }

    pub fn allocation_rows(&self) -> impl Iterator<Item = AllocationRow> + '_ {
        self.allocation.iter().enumerate().flat_map(move |(k, v)| {
            v.iter().enumerate().map(move |(m, &lambda)| AllocationRow {
                snr_db: self.snr_db,
                k,
                m,
                lambda,
            })
        })
    }
}

pub fn run_solve(cfg: &ScenarioConfig, omegas: &[CouplingMatrix], eve: &CouplingMatrix) -> (Vec<SolveRecord>, Vec<Failure>) {
    let results: Vec<Result<SolveRecord, Failure>> = solve_grid(cfg, omegas, eve)
        .into_iter()
        .map(|pt| {
            let fail = |error: String| Failure {
                snr_db: Some(pt.snr_db),
                error,
            };
            let sol = pt.result.map_err(fail)?;
            let solver = &pt.solver;
            let rec = SolveRecord {
                snr_db: pt.snr_db,
                p: solver.p,
                objective: solver.log_base.from_bits(sol.state.objective),
                iterations: sol.iterations,
                converged: sol.converged,
                warm_started: pt.warm_started,
                certificate: sol.certificate,
                allocation: (0..sol.alloc.users()).map(|k| sol.alloc.user(k).to_vec()).collect(),
            };
            let c = &rec.certificate;
            crate::check_finite(&[
                ("objective", Some(rec.objective)),
                ("kkt_residual_max", Some(c.residual_max())),
                ("mu", Some(c.mu)),
            ])
            .map_err(fail)?;
            Ok(rec)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(v) => records.push(v),
            Err(f) => failures.push(f),
        }
    }
    (records, failures)
}
