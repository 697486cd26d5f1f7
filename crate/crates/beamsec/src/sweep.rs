//! SNR sweeps: solve at every point, then compare Monte-Carlo rates with the
//! deterministic-equivalent bound at the solver's allocation.

use std::time::Instant;

use beamsec_core::channel::CouplingMatrix;
use beamsec_core::optimizer::CccpSolution;
use beamsec_core::rng::SeedSpace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::grid::{solve_grid, GridPoint};
use crate::mc::secrecy_rates_par;
use crate::{check_finite, RowStatus};

/// One SNR point. Rates are in the configured log base; numeric columns are
/// empty when the point failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub p: f64,
    pub status: RowStatus,
    pub error: Option<String>,
    /// `sum_k [R_k - C^eve_k]^+`, both terms Monte-Carlo.
    pub r_sec_mc: Option<f64>,
    pub se_r_sec_mc: Option<f64>,
    /// `sum_k [R_k - C^eve_k,ub]^+`, Monte-Carlo `R_k`.
    pub r_sec_lb_mc: Option<f64>,
    pub se_r_sec_lb_mc: Option<f64>,
    /// Deterministic-equivalent lower bound.
    pub r_sec_lb_de: Option<f64>,
    /// `(r_sec_mc - r_sec_lb_mc) / r_sec_mc`.
    pub lb_gap_rel: Option<f64>,
    /// `|r_sec_lb_de - r_sec_lb_mc| / r_sec_lb_mc`.
    pub de_gap_rel: Option<f64>,
    pub cccp_iterations: Option<usize>,
    pub converged: Option<bool>,
    /// Solution came from the continuation pass over the SNR grid.
    pub warm_started: Option<bool>,
    pub kkt_residual_max: Option<f64>,
    pub slackness: Option<f64>,
    pub power_used: Option<f64>,
    pub mu: Option<f64>,
    pub mc_samples: u64,
    /// Seconds spent on the point.
    pub wall_time: f64,
}

/// Per-user terms behind a sweep row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub snr_db: f64,
    pub k: usize,
    pub r_k: f64,
    pub se_r_k: f64,
    pub c_ub_k: f64,
    pub c_mc_k: Option<f64>,
    pub se_c_mc_k: Option<f64>,
    pub r_sec_lb: f64,
    pub r_sec_mc: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub rates: Vec<RateRow>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

fn point(
    cfg: &ScenarioConfig,
    omegas: &[CouplingMatrix],
    eve: &CouplingMatrix,
    pt: &GridPoint,
    sol: &CccpSolution,
) -> Result<(SweepRow, Vec<RateRow>), String> {
    let start = Instant::now();
    let (snr_db, solver) = (pt.snr_db, &pt.solver);
    let report = secrecy_rates_par(&sol.alloc, omegas, eve, cfg.mc_samples, &SeedSpace::new(cfg.seed), cfg.eve_mc)
        .map_err(|e| e.to_string())?;
    let base = solver.log_base;
    let lb = report.secrecy_sum_rate_lb;
    let mc = report.secrecy_sum_rate_mc;
    let de = sol.state.objective;

    let row = SweepRow {
        snr_db,
        p: solver.p,
        status: RowStatus::Ok,
        error: None,
        r_sec_mc: mc.map(|e| base.from_bits(e.mean)),
        se_r_sec_mc: mc.map(|e| base.from_bits(e.std_error)),
        r_sec_lb_mc: Some(base.from_bits(lb.mean)),
        se_r_sec_lb_mc: Some(base.from_bits(lb.std_error)),
        r_sec_lb_de: Some(base.from_bits(de)),
        lb_gap_rel: mc.and_then(|e| ratio(e.mean - lb.mean, e.mean)),
        de_gap_rel: ratio((de - lb.mean).abs(), lb.mean),
        cccp_iterations: Some(sol.iterations),
        converged: Some(sol.converged),
        warm_started: Some(pt.warm_started),
        kkt_residual_max: Some(sol.certificate.residual_max()),
        slackness: Some(sol.certificate.slackness),
        power_used: Some(sol.alloc.total()),
        mu: Some(sol.certificate.mu),
        mc_samples: cfg.mc_samples,
        wall_time: pt.solve_time + start.elapsed().as_secs_f64(),
    };
    check_finite(&[
        ("r_sec_mc", row.r_sec_mc),
        ("se_r_sec_mc", row.se_r_sec_mc),
        ("r_sec_lb_mc", row.r_sec_lb_mc),
        ("se_r_sec_lb_mc", row.se_r_sec_lb_mc),
        ("r_sec_lb_de", row.r_sec_lb_de),
        ("lb_gap_rel", row.lb_gap_rel),
        ("de_gap_rel", row.de_gap_rel),
        ("kkt_residual_max", row.kkt_residual_max),
        ("slackness", row.slackness),
        ("power_used", row.power_used),
        ("mu", row.mu),
    ])?;

    let rates = (0..omegas.len())
        .map(|k| {
            let eve_k = report.per_user_eve_mc.as_ref().map(|v| v[k]);
            RateRow {
                snr_db,
                k,
                r_k: base.from_bits(report.per_user_rate[k].mean),
                se_r_k: base.from_bits(report.per_user_rate[k].std_error),
                c_ub_k: base.from_bits(report.per_user_eve_bound[k]),
                c_mc_k: eve_k.map(|e| base.from_bits(e.mean)),
                se_c_mc_k: eve_k.map(|e| base.from_bits(e.std_error)),
                r_sec_lb: base.from_bits(lb.mean),
                r_sec_mc: mc.map(|e| base.from_bits(e.mean)),
            }
        })
        .collect::<Vec<_>>();
    for r in &rates {
        check_finite(&[
            ("r_k", Some(r.r_k)),
            ("se_r_k", Some(r.se_r_k)),
            ("c_ub_k", Some(r.c_ub_k)),
            ("c_mc_k", r.c_mc_k),
            ("se_c_mc_k", r.se_c_mc_k),
        ])
        .map_err(|e| format!("user {}: {e}", r.k))?;
    }
    Ok((row, rates))
}

fn failed(cfg: &ScenarioConfig, pt: &GridPoint, error: String, wall_time: f64) -> SweepRow {
    SweepRow {
        snr_db: pt.snr_db,
        p: pt.solver.p,
        status: RowStatus::Failed,
        error: Some(error),
        r_sec_mc: None,
        se_r_sec_mc: None,
        r_sec_lb_mc: None,
        se_r_sec_lb_mc: None,
        r_sec_lb_de: None,
        lb_gap_rel: None,
        de_gap_rel: None,
        cccp_iterations: None,
        converged: None,
        warm_started: None,
        kkt_residual_max: None,
        slackness: None,
        power_used: None,
        mu: None,
        mc_samples: cfg.mc_samples,
        wall_time,
    }
}

/// Runs every SNR point on the current rayon pool (see [`solve_grid`]). A failing point becomes a
/// `failed` row and the sweep continues.
pub fn run_sweep(cfg: &ScenarioConfig, omegas: &[CouplingMatrix], eve: &CouplingMatrix) -> SweepOutput {
    let points = solve_grid(cfg, omegas, eve);
    let results: Vec<(SweepRow, Vec<RateRow>)> = points
        .par_iter()
        .map(|pt| {
            let res = match &pt.result {
                Ok(sol) => point(cfg, omegas, eve, pt, sol),
                Err(e) => Err(e.clone()),
            };
            res.unwrap_or_else(|e| (failed(cfg, pt, e, pt.solve_time), Vec::new()))
        })
        .collect();
    let mut out = SweepOutput::default();
    for (row, rates) in results {
        out.rows.push(row);
        out.rates.extend(rates);
    }
    out
}
