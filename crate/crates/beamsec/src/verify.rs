//! Verification suites for the analytical properties the solver relies on.
//!
//! Every suite runs through the configured solver settings, so a broken
//! solver option shows up here rather than silently in a sweep.

use beamsec_core::optimizer::{cccp_solve_traced, surrogate_objective, SolverConfig};
use beamsec_core::rng::SeedSpace;
use beamsec_core::theory::{
    lemma1_exact, lemma1_family_check, oracle_surrogate, theorem1_rotation_test, theorem2_excluded_beams, Lemma1Family,
    OracleConfig,
};
use beamsec_core::trace::NoTrace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{power_from_db, ScenarioConfig};
use crate::instances::{cluster_instance, overlap_instance, SMALL_SHAPES};
use crate::io::SCHEMA_VERSION;

/// Leaked power allowed on excluded beams, relative to `P`.
pub const EXCLUSION_TOL: f64 = 1e-6;
/// Relative gap allowed between the solver's surrogate value and the oracle's.
pub const ORACLE_TOL: f64 = 1e-3;
/// Exact cases must agree this closely.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub cases: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub passed: bool,
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.name == name)
    }
}

fn family_name(f: Lemma1Family) -> &'static str {
    match f {
        Lemma1Family::Exponential => "exponential",
        Lemma1Family::TwoPoint => "two-point",
        Lemma1Family::Uniform => "uniform",
        Lemma1Family::ScaledChiSquare => "scaled-chi-square",
    }
}

fn errored(name: &str, e: impl std::fmt::Display) -> SuiteReport {
    SuiteReport {
        name: name.into(),
        passed: false,
        summary: format!("error: {e}"),
        cases: Vec::new(),
    }
}

/// Ratio inequality over the sampled families, plus exact point masses
/// where both sides must coincide.
pub fn lemma1_suite(cfg: &ScenarioConfig) -> SuiteReport {
    let seeds = SeedSpace::new(cfg.seed).child(1);
    let mut cases = Vec::new();
    let mut failed = 0;
    for &(a, b) in &cfg.verify.lemma_params {
        for family in Lemma1Family::ALL {
            match lemma1_family_check(family, a, b, cfg.verify.lemma_samples, &seeds) {
                Ok(r) => {
                    failed += usize::from(!r.holds);
                    cases.push(json!({
                        "kind": "sampled", "family": family_name(family), "a": a, "b": b,
                        "lhs": r.lhs, "rhs": r.rhs, "std_error": r.std_error, "holds": r.holds,
                    }));
                }
                Err(e) => return errored("lemma1", e),
            }
        }
        for c in [0.0, 0.5, 2.0, 10.0] {
            match lemma1_exact(&[(c, 1.0)], a, b) {
                Ok(r) => {
                    let ok = (r.lhs - r.rhs).abs() <= EXACT_TOL;
                    failed += usize::from(!ok);
                    cases.push(json!({
                        "kind": "point-mass", "value": c, "a": a, "b": b,
                        "lhs": r.lhs, "rhs": r.rhs, "std_error": 0.0, "holds": ok,
                    }));
                }
                Err(e) => return errored("lemma1", e),
            }
        }
    }
    SuiteReport {
        name: "lemma1".into(),
        passed: failed == 0 && !cases.is_empty(),
        summary: format!("{} of {} cases hold", cases.len() - failed, cases.len()),
        cases,
    }
}

/// Haar rotations of the solver's allocation must not beat the diagonal one.
pub fn theorem1_suite(cfg: &ScenarioConfig) -> SuiteReport {
    let v = &cfg.verify;
    let run = || -> beamsec_core::Result<SuiteReport> {
        let (omegas, eve) = cluster_instance(v.rotation_m, v.rotation_k, cfg.dims.n_r, cfg.dims.n_e, cfg.seed)?;
        let solver = cfg.solver.clone().with_power(power_from_db(v.snr_db));
        let sol = cccp_solve_traced(&omegas, &eve, &solver, &mut NoTrace)?;
        let seeds = SeedSpace::new(cfg.seed).child(2);
        let r = theorem1_rotation_test(&omegas, &eve, &sol.alloc, v.rotation_trials, v.rotation_samples, &seeds)?;
        let cases = r
            .trials
            .iter()
            .enumerate()
            .map(|(i, t)| {
                json!({
                    "trial": i, "diagonal": t.diagonal, "rotated": t.rotated,
                    "std_error": t.std_error, "holds": t.diagonal_wins,
                })
            })
            .collect();
        Ok(SuiteReport {
            name: "theorem1".into(),
            passed: r.passes,
            summary: format!("diagonal wins or ties in {:.1}% of rotations", 100.0 * r.win_fraction),
            cases,
        })
    };
    run().unwrap_or_else(|e| errored("theorem1", e))
}

/// Single-antenna instances with forced overlaps: the solution must leave
/// the excluded beams empty.
pub fn theorem2_suite(cfg: &ScenarioConfig) -> SuiteReport {
    let v = &cfg.verify;
    let solver = cfg.solver.clone().with_power(power_from_db(v.snr_db));
    let results: Vec<beamsec_core::Result<Value>> = (0..v.exclusion_instances)
        .into_par_iter()
        .map(|i| {
            let seed = SeedSpace::new(cfg.seed).child(3 + i as u64).seed;
            let (omegas, eve) = overlap_instance(v.exclusion_m, v.exclusion_k, seed)?;
            let report = theorem2_excluded_beams(&omegas, &eve)?;
            let sol = cccp_solve_traced(&omegas, &eve, &solver, &mut NoTrace)?;
            let leaked = report.excluded_power(&sol.alloc);
            let limit = EXCLUSION_TOL * solver.p;
            Ok(json!({
                "instance": i, "excluded_pairs": report.excluded.len(),
                "leaked_power": leaked, "limit": limit, "holds": leaked <= limit,
            }))
        })
        .collect();
    let mut cases = Vec::new();
    for r in results {
        match r {
            Ok(v) => cases.push(v),
            Err(e) => return errored("theorem2", e),
        }
    }
    let held = cases.iter().filter(|c| c["holds"] == true).count();
    let worst = cases.iter().filter_map(|c| c["leaked_power"].as_f64()).fold(0.0, f64::max);
    SuiteReport {
        name: "theorem2".into(),
        passed: held == cases.len() && !cases.is_empty(),
        summary: format!("{held} of {} instances clean, worst leak {worst:.3e}", cases.len()),
        cases,
    }
}

/// Solver against projected-gradient ascent on the final surrogate of small
/// problems.
pub fn oracle_suite(cfg: &ScenarioConfig) -> SuiteReport {
    let v = &cfg.verify;
    let solver: SolverConfig = cfg.solver.clone().with_power(power_from_db(v.snr_db));
    let oracle = OracleConfig {
        iters: v.oracle_iters,
        step0: None,
    };
    let results: Vec<beamsec_core::Result<Value>> = (0..v.oracle_instances)
        .into_par_iter()
        .map(|i| {
            let (k, m) = SMALL_SHAPES[i % SMALL_SHAPES.len()];
            let seed = SeedSpace::new(cfg.seed).child(1000 + i as u64).seed;
            let (omegas, eve) = cluster_instance(m, k, cfg.dims.n_r, cfg.dims.n_e, seed)?;
            let sol = cccp_solve_traced(&omegas, &eve, &solver, &mut NoTrace)?;
            let problem = sol.last_surrogate.problem(&omegas);
            let ours = surrogate_objective(&sol.last_iwfa.state.x, &problem);
            let (_, best) = oracle_surrogate(&problem, &oracle)?;
            let rel = (ours - best).abs() / best.abs().max(1e-300);
            Ok(json!({
                "instance": i, "k": k, "m": m, "solver": ours, "oracle": best,
                "rel_gap": rel, "holds": rel <= ORACLE_TOL,
            }))
        })
        .collect();
    let mut cases = Vec::new();
    for r in results {
        match r {
            Ok(v) => cases.push(v),
            Err(e) => return errored("oracle", e),
        }
    }
    let held = cases.iter().filter(|c| c["holds"] == true).count();
    let worst = cases.iter().filter_map(|c| c["rel_gap"].as_f64()).fold(0.0, f64::max);
    SuiteReport {
        name: "oracle".into(),
        passed: held == cases.len() && !cases.is_empty(),
        summary: format!("{held} of {} instances within {ORACLE_TOL:e}, worst gap {worst:.3e}", cases.len()),
        cases,
    }
}

/// All suites on the current rayon pool.
pub fn run_verify(cfg: &ScenarioConfig) -> VerifyReport {
    let suites = vec![lemma1_suite(cfg), theorem1_suite(cfg), theorem2_suite(cfg), oracle_suite(cfg)];
    VerifyReport {
        schema_version: SCHEMA_VERSION,
        passed: suites.iter().all(|s| s.passed),
        seed: cfg.seed,
        suites,
    }
}
