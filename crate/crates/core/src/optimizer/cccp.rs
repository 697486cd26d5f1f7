//! CCCP outer loop.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{InitStrategy, SolverConfig};
use super::iwfa::{iwfa, IwfaOutcome, KktCertificate};
use super::surrogate::{delta_matrices, SurrogateProblem};
use crate::channel::{beam_gains, CouplingMatrix};
use crate::de::{de_secrecy_lower_bound_traced, DeLowerBound, DeterministicEquivalentState};
use crate::rates::PowerAllocation;
use crate::trace::{LoopId, TraceRow, TraceSink};
use crate::{Error, Result};

/// Halvings tried when the surrogate maximizer lowers the true objective.
const MAX_BACKTRACK: usize = 40;
/// Longest extrapolated step tried past a successful full step.
const MAX_EXTRAPOLATION: f64 = 16.0;

/// `cur + t (next - cur)` clipped to the nonnegative orthant and scaled back
/// onto the budget if it left it.
fn extrapolate(cur: &PowerAllocation, next: &PowerAllocation, t: f64, p: f64) -> PowerAllocation {
    let mut a = cur.lerp(next, t);
    let total = a.total();
    if total > p {
        for v in a.as_mut_slice() {
            *v *= p / total;
        }
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CccpState {
    pub alloc: PowerAllocation,
    /// `delta[k][m]` linearized at `alloc`, nats.
    pub delta: Vec<Vec<f64>>,
    pub de_states: Vec<DeterministicEquivalentState>,
    /// Deterministic secrecy lower bound, clamped per user, bits.
    pub objective: f64,
    /// The same sum without clamping; this is what the loop ascends.
    pub objective_unclamped: f64,
    pub iteration: usize,
}

/// The frozen pieces of one surrogate, detached from the coupling matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateData {
    pub gamma: Vec<Vec<f64>>,
    pub gamma_tilde: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub p: f64,
}

impl SurrogateData {
    pub fn problem<'a>(&self, omegas: &'a [CouplingMatrix]) -> SurrogateProblem<'a> {
        SurrogateProblem {
            omegas,
            gamma: self.gamma.clone(),
            gamma_tilde: self.gamma_tilde.clone(),
            delta: self.delta.clone(),
            p: self.p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CccpSolution {
    pub alloc: PowerAllocation,
    pub state: CccpState,
    /// Unclamped objective at `Lambda^(0)`, bits.
    pub initial_objective: f64,
    /// Unclamped objective after each iteration `1..=L`, bits.
    pub objective_history: Vec<f64>,
    /// `L`.
    pub iterations: usize,
    pub converged: bool,
    /// Iterations whose step had to be shortened.
    pub backtracks: usize,
    /// Successful extrapolated steps past the surrogate maximizer.
    pub extrapolated: usize,
    /// Certificate of the last water-filling solve.
    pub certificate: KktCertificate,
    /// Last surrogate and its water-filling result.
    pub last_surrogate: SurrogateData,
    pub last_iwfa: IwfaOutcome,
}

/// `Lambda^(0)` per the configured strategy.
pub fn initial_allocation(omegas: &[CouplingMatrix], omega_eve: &CouplingMatrix, config: &SolverConfig) -> Result<PowerAllocation> {
    let k_users = omegas.len();
    let m = omega_eve.cols();
    let p = config.p;
    let uniform = || PowerAllocation::new(k_users, m, vec![p / (k_users * m) as f64; k_users * m]);
    match &config.init {
        InitStrategy::Uniform => uniform(),
        InitStrategy::Custom { lambdas } => {
            let mut a = PowerAllocation::from_users(lambdas)?;
            if a.users() != k_users || a.beams() != m {
                return Err(Error::dim("custom initial allocation has the wrong shape"));
            }
            let total = a.total();
            if total > p {
                for v in a.as_mut_slice() {
                    *v *= p / total;
                }
            }
            Ok(a)
        }
        InitStrategy::StrongestBeams { b } => {
            let eve = beam_gains(omega_eve).gains;
            let mut chosen = vec![false; k_users * m];
            let mut count = 0usize;
            for (k, omega) in omegas.iter().enumerate() {
                let gains = beam_gains(omega).gains;
                let margin: Vec<f64> = gains.iter().zip(&eve).map(|(g, e)| g - e).collect();
                let mut idx: Vec<usize> = (0..m).filter(|&i| margin[i] > 0.0).collect();
                // stable: equal margins keep ascending beam order
                idx.sort_by(|&a, &b| margin[b].partial_cmp(&margin[a]).unwrap_or(core::cmp::Ordering::Equal));
                for &i in idx.iter().take((*b).min(m)) {
                    chosen[k * m + i] = true;
                    count += 1;
                }
            }
            if count == 0 {
                return uniform();
            }
            let share = p / count as f64;
            PowerAllocation::new(k_users, m, chosen.iter().map(|&c| if c { share } else { 0.0 }).collect())
        }
    }
}

struct Evaluator<'a, 's> {
    omegas: &'a [CouplingMatrix],
    omega_eve: &'a CouplingMatrix,
    config: &'a SolverConfig,
    sink: &'s mut dyn TraceSink,
    de_counter: u64,
}

impl Evaluator<'_, '_> {
    fn bound(&mut self, alloc: &PowerAllocation, outer: u64) -> Result<DeLowerBound> {
        let de_cfg = self.config.de_config();
        if !self.sink.enabled(LoopId::DeFixedPoint) {
            return de_secrecy_lower_bound_traced(alloc, self.omegas, self.omega_eve, &de_cfg, &mut |_, _, _| {});
        }
        let sink = &mut *self.sink;
        let counter = &mut self.de_counter;
        de_secrecy_lower_bound_traced(alloc, self.omegas, self.omega_eve, &de_cfg, &mut |_, it, r| {
            *counter += 1;
            sink.record(TraceRow {
                loop_id: LoopId::DeFixedPoint,
                iteration: *counter,
                outer,
                inner: it as u64,
                value: r,
                kkt_residual_max: None,
                power_used: None,
                mu: None,
            });
        })
    }

    fn delta(&self, alloc: &PowerAllocation) -> Result<Vec<Vec<f64>>> {
        let mut d = delta_matrices(alloc, self.omegas, self.omega_eve)?;
        if self.config.flip_delta_sign {
            d.iter_mut().flatten().for_each(|v| *v = -*v);
        }
        Ok(d)
    }
}

fn with_context(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Cccp {
        iteration,
        source: Box::new(e),
    }
}

/// Appends a polishing run to the water-filling outcome it continued.
fn merge_polish(mut first: IwfaOutcome, polish: IwfaOutcome) -> IwfaOutcome {
    first.state.trace.extend_from_slice(&polish.state.trace[1..]);
    first.state.x = polish.state.x;
    first.state.mu = polish.state.mu;
    first.state.c_tilde = polish.state.c_tilde;
    first.certificate = polish.certificate;
    first.sweeps += polish.sweeps;
    first.converged = polish.converged;
    first.full_steps += polish.full_steps;
    first.verbatim_mu_sweeps += polish.verbatim_mu_sweeps;
    first
}

/// Solves the power-allocation problem, returning the allocation and the
/// CCCP/water-filling trace.
pub fn cccp_solve(omegas: &[CouplingMatrix], omega_eve: &CouplingMatrix, config: &SolverConfig) -> Result<(CccpSolution, Vec<TraceRow>)> {
    let mut rows = Vec::new();
    let sol = {
        let mut sink = crate::trace::Filtered {
            inner: &mut rows,
            loops: &[LoopId::Cccp, LoopId::Iwfa],
        };
        cccp_solve_traced(omegas, omega_eve, config, &mut sink)?
    };
    Ok((sol, rows))
}

/// [`cccp_solve`] writing trace rows into `sink`.
pub fn cccp_solve_traced(
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    config: &SolverConfig,
    sink: &mut dyn TraceSink,
) -> Result<CccpSolution> {
    config.validate()?;
    if omegas.is_empty() {
        return Err(Error::dim("at least one user required"));
    }
    let m = omega_eve.cols();
    if omegas.iter().any(|o| o.cols() != m) {
        return Err(Error::dim("coupling matrices disagree on M"));
    }
    if !(config.p > 0.0) {
        return Err(Error::config("the solver needs a positive power budget"));
    }
    let p = config.p;

    let mut cur = initial_allocation(omegas, omega_eve, config)?;
    let mut ev = Evaluator {
        omegas,
        omega_eve,
        config,
        sink,
        de_counter: 0,
    };
    let mut bound = ev.bound(&cur, 0).map_err(with_context(0))?;
    let initial_objective = bound.unclamped;
    let mut history = Vec::new();
    let mut iwfa_counter = 0u64;
    let mut backtracks = 0;
    let mut extrapolated = 0;
    let mut converged = false;
    let mut last: Option<(SurrogateData, IwfaOutcome)> = None;
    let mut iterations = 0;

    // intermediate surrogates only steer the outer loop, so their solves stop
    // on the objective change alone; the certificate is polished at exit
    let inner = SolverConfig {
        kkt_tol: f64::INFINITY,
        ..config.clone()
    };
    for i in 1..=config.max_cccp_iter {
        iterations = i;
        let delta = ev.delta(&cur).map_err(with_context(i))?;
        let problem = SurrogateProblem::new(omegas, &bound.states, delta, p)?;
        let out = iwfa(&problem, &cur, &inner, &mut *ev.sink, i as u64, iwfa_counter).map_err(with_context(i))?;
        iwfa_counter += out.sweeps as u64;

        let mut cand = out.state.x.clone();
        let mut cand_bound = ev.bound(&cand, i as u64).map_err(with_context(i))?;
        let mut t = 1.0;
        let mut tries = 0;
        while cand_bound.unclamped < bound.unclamped && tries < MAX_BACKTRACK {
            t *= 0.5;
            tries += 1;
            cand = cur.lerp(&out.state.x, t);
            cand_bound = ev.bound(&cand, i as u64).map_err(with_context(i))?;
        }
        if tries > 0 {
            backtracks += 1;
        } else if cand_bound.unclamped > bound.unclamped {
            // CCCP creeps linearly on flat ridges; keep doubling the step
            // while the true objective still improves
            let mut t = 2.0;
            while t <= MAX_EXTRAPOLATION {
                let far = extrapolate(&cur, &out.state.x, t, p);
                let far_bound = ev.bound(&far, i as u64).map_err(with_context(i))?;
                if far_bound.unclamped <= cand_bound.unclamped {
                    break;
                }
                cand = far;
                cand_bound = far_bound;
                extrapolated += 1;
                t *= 2.0;
            }
        }
        let stalled = cand_bound.unclamped < bound.unclamped;
        if !stalled {
            cur = cand;
            bound = cand_bound;
        }
        let change = bound.unclamped - history.last().copied().unwrap_or(initial_objective);
        history.push(bound.unclamped);
        if ev.sink.enabled(LoopId::Cccp) {
            ev.sink.record(TraceRow {
                loop_id: LoopId::Cccp,
                iteration: i as u64,
                outer: i as u64,
                inner: i as u64,
                value: bound.unclamped,
                kkt_residual_max: Some(out.certificate.residual_max()),
                power_used: Some(cur.total()),
                mu: Some(out.certificate.mu),
            });
        }
        let data = SurrogateData {
            gamma: problem.gamma,
            gamma_tilde: problem.gamma_tilde,
            delta: problem.delta,
            p,
        };
        last = Some((data, out));
        if stalled || change.abs() <= config.xi2 {
            converged = true;
            break;
        }
    }

    let (last_surrogate, mut last_iwfa) = last.expect("at least one iteration runs");
    if last_iwfa.certificate.residual_max() > config.kkt_tol {
        let problem = last_surrogate.problem(omegas);
        let polish = iwfa(&problem, &last_iwfa.state.x, config, &mut *ev.sink, iterations as u64, iwfa_counter)
            .map_err(with_context(iterations))?;
        let polished = ev.bound(&polish.state.x, iterations as u64).map_err(with_context(iterations))?;
        if polished.unclamped >= bound.unclamped {
            cur = polish.state.x.clone();
            bound = polished;
            if let Some(h) = history.last_mut() {
                *h = bound.unclamped;
            }
        }
        last_iwfa = merge_polish(last_iwfa, polish);
    }
    let delta = ev.delta(&cur)?;
    Ok(CccpSolution {
        alloc: cur.clone(),
        state: CccpState {
            alloc: cur,
            delta,
            de_states: bound.states,
            objective: bound.value,
            objective_unclamped: bound.unclamped,
            iteration: iterations,
        },
        initial_objective,
        objective_history: history,
        iterations,
        converged,
        backtracks,
        extrapolated,
        certificate: last_iwfa.certificate,
        last_surrogate,
        last_iwfa,
    })
}
