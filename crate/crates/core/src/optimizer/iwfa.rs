//! Iterative water-filling for one CCCP surrogate.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use super::surrogate::{newton_root, newton_root_bracketed, CoordinateResidual, SurrogateProblem};
use crate::rates::PowerAllocation;
use crate::trace::{LoopId, TraceRow, TraceSink};
use crate::{Error, Result, BITS_PER_NAT};

/// Verbatim multiplier increments tried before bisection takes over.
const VERBATIM_MU_STEPS: usize = 10;
/// Coordinates at or below this fraction of `max(P, 1)` count as inactive in
/// the certificate.
const ACTIVE_FLOOR: f64 = 1e-12;
/// Slope evaluations per line search.
const LINE_SEARCH_ITERS: usize = 60;
/// Accepted decrease of the surrogate, bits, when a step is forced.
const MONOTONE_SLACK: f64 = 1e-12;

/// Stationarity certificate of an allocation for one surrogate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub mu: f64,
    /// `max |d C~/d x - mu|` over active coordinates, nats.
    pub active_max: f64,
    /// `max (d C~/d x - mu)^+` over inactive coordinates, nats.
    pub inactive_max: f64,
    /// `|mu (sum x - P)|`.
    pub slackness: f64,
    pub power_used: f64,
}

impl KktCertificate {
    pub fn residual_max(&self) -> f64 {
        self.active_max.max(self.inactive_max)
    }

    /// Certificate at `x` with the multiplier that minimizes the largest
    /// violation: the midpoint between the smallest active slope and the
    /// largest slope overall, clamped at zero.
    pub fn evaluate(problem: &SurrogateProblem<'_>, x: &PowerAllocation) -> Self {
        let grad = problem.gradient(x);
        let floor = ACTIVE_FLOOR * problem.p.max(1.0);
        let (mut min_a, mut max_a, mut max_i) = (f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (k, g_k) in grad.iter().enumerate() {
            for (&g, &v) in g_k.iter().zip(x.user(k)) {
                if v > floor {
                    min_a = min_a.min(g);
                    max_a = max_a.max(g);
                } else {
                    max_i = max_i.max(g);
                }
            }
        }
        let mu = if min_a.is_finite() {
            (0.5 * (min_a + max_a.max(max_i))).max(0.0)
        } else {
            max_i.max(0.0)
        };
        let active_max = if min_a.is_finite() { (max_a - mu).max(mu - min_a) } else { 0.0 };
        let inactive_max = if max_i.is_finite() { (max_i - mu).max(0.0) } else { 0.0 };
        let power_used = x.total();
        Self {
            mu,
            active_max,
            inactive_max,
            slackness: (mu * (power_used - problem.p)).abs(),
            power_used,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwfaState {
    pub x: PowerAllocation,
    pub mu: f64,
    /// Surrogate at `x`, bits.
    pub c_tilde: f64,
    /// Surrogate after each sweep, starting with the initial point, bits.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwfaOutcome {
    pub state: IwfaState,
    pub certificate: KktCertificate,
    pub sweeps: usize,
    /// Stopped on tolerance rather than on the sweep cap.
    pub converged: bool,
    /// Sweeps that took the full best-response step.
    pub full_steps: usize,
    /// Sweeps whose multiplier came from the verbatim increment rule alone.
    pub verbatim_mu_sweeps: usize,
}

/// One Jacobi sweep: every coordinate's residual against the frozen snapshot.
struct Sweep<'p> {
    residuals: Vec<CoordinateResidual>,
    warm: &'p [f64],
    p: f64,
    xi3: f64,
    newton_iter: usize,
}

impl Sweep<'_> {
    /// Best responses at `mu` into `out`; returns total power, or infinity
    /// when some root exceeds the budget (or does not exist and `exact` is
    /// off).
    fn roots(&self, mu: f64, exact: bool, out: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for ((r, o), &x0) in self.residuals.iter().zip(out.iter_mut()).zip(self.warm) {
            if r.value(0.0, mu) <= 0.0 {
                *o = 0.0;
                continue;
            }
            if r.value(self.p, mu) > 0.0 {
                if !exact {
                    return f64::INFINITY;
                }
                match newton_root(|x| r.eval(x, mu), x0, self.xi3, self.newton_iter) {
                    Ok(v) => *o = v,
                    Err(_) => *o = f64::INFINITY,
                }
            } else {
                *o = newton_root_bracketed(|x| r.eval(x, mu), 0.0, self.p, x0, self.xi3, self.newton_iter);
            }
            total += *o;
        }
        total
    }

    /// Algorithm-style increment: the smallest change of any residual when
    /// its coordinate absorbs an equal share of the budget gap.
    fn verbatim_increment(&self, xbar: &[f64], gap: f64) -> f64 {
        let share = gap / self.residuals.len() as f64;
        self.residuals
            .iter()
            .zip(xbar)
            .filter(|(_, x)| x.is_finite())
            .map(|(r, &x)| (r.value((x + share).max(0.0), 0.0) - r.value(x, 0.0)).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

struct BestResponse {
    xbar: Vec<f64>,
    mu: f64,
    verbatim: bool,
}

/// Budget gap the search keeps polishing toward once `xi4` is met, as a
/// fraction of `P`: the best response must sit on the budget almost exactly
/// for the averaged step to remain an ascent direction near the optimum.
const POLISH_GAP: f64 = 1e-12;

fn within_budget(p: f64, total: f64, mu: f64, xi4: f64) -> bool {
    total <= p && p - total <= xi4 / mu.max(1.0)
}

fn polished(p: f64, total: f64, mu: f64, xi4: f64) -> bool {
    within_budget(p, total, mu, xi4.min(POLISH_GAP * p))
}

/// Relative width of the first bracket probed around a warm multiplier.
const WARM_WIDTH: f64 = 1e-4;

fn best_response(sweep: &Sweep<'_>, config: &SolverConfig, warm_mu: Option<f64>) -> Result<BestResponse> {
    let n = sweep.residuals.len();
    let p = sweep.p;
    let xi4 = config.xi4_abs();
    let mut buf = vec![0.0; n];
    let total0 = sweep.roots(0.0, true, &mut buf);
    if total0 <= p {
        return Ok(BestResponse {
            xbar: buf,
            mu: 0.0,
            verbatim: false,
        });
    }

    // At mu_hi every residual is nonpositive at zero: nothing is allocated.
    let mut hi = sweep.residuals.iter().map(|r| r.value(0.0, 0.0)).fold(0.0, f64::max);
    let mut x_hi = vec![0.0; n];
    let mut f_hi = -p;
    let mut lo = 0.0;
    let mut f_lo = total0 - p;
    if within_budget(p, 0.0, hi, xi4) {
        return Ok(BestResponse {
            xbar: x_hi,
            mu: hi,
            verbatim: false,
        });
    }

    let mut mu = 0.0;
    let mut total = total0;
    let mut verbatim = false;
    let warm = warm_mu.filter(|&w| w > 0.0 && w < hi);
    if let Some(w) = warm {
        // consecutive sweeps move the water level little: probe outward
        // from the last one until the budget is bracketed
        let mut width = w * WARM_WIDTH;
        let mut trial = w;
        loop {
            let t = sweep.roots(trial, false, &mut buf);
            if t <= p {
                if polished(p, t, trial, xi4) {
                    return Ok(BestResponse {
                        xbar: buf,
                        mu: trial,
                        verbatim: false,
                    });
                }
                hi = trial;
                f_hi = t - p;
                x_hi.copy_from_slice(&buf);
                trial -= width;
                if trial <= lo {
                    break;
                }
            } else {
                lo = trial;
                f_lo = t - p;
                trial += width;
                if trial >= hi {
                    break;
                }
            }
            if lo > 0.0 && hi - lo <= 2.0 * width {
                break;
            }
            width *= 4.0;
        }
    }
    for _ in 0..if warm.is_some() { 0 } else { VERBATIM_MU_STEPS } {
        if !total.is_finite() {
            break;
        }
        let step = sweep.verbatim_increment(&buf, p - total);
        if !(step > 0.0 && step.is_finite()) {
            break;
        }
        let trial = mu + step;
        if trial >= hi {
            break;
        }
        let t = sweep.roots(trial, true, &mut buf);
        if t > p {
            mu = trial;
            total = t;
            lo = trial;
            f_lo = t - p;
        } else {
            verbatim = within_budget(p, t, trial, xi4);
            if polished(p, t, trial, xi4) {
                return Ok(BestResponse {
                    xbar: buf,
                    mu: trial,
                    verbatim,
                });
            }
            hi = trial;
            f_hi = t - p;
            x_hi.copy_from_slice(&buf);
            break;
        }
    }

    // Illinois false position on the decreasing map mu -> p_tot(mu) - P,
    // bisecting whenever the lower end is unbounded.
    let mut side = 0i8;
    for _ in 0..config.max_mu_iter {
        let mut trial = if f_lo.is_finite() {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo + hi)
        };
        if !(trial > lo && trial < hi) {
            trial = 0.5 * (lo + hi);
        }
        if trial <= lo || trial >= hi {
            break;
        }
        let t = sweep.roots(trial, false, &mut buf);
        let f = t - p;
        if f <= 0.0 {
            hi = trial;
            f_hi = f;
            x_hi.copy_from_slice(&buf);
            if polished(p, t, trial, xi4) {
                return Ok(BestResponse {
                    xbar: x_hi,
                    mu: trial,
                    verbatim,
                });
            }
            if side == -1 && f_lo.is_finite() {
                f_lo *= 0.5;
            }
            side = -1;
        } else {
            lo = trial;
            f_lo = f;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        }
    }
    // the bracket collapsed or the cap was hit: settle for xi4
    if within_budget(p, p + f_hi, hi, xi4) {
        return Ok(BestResponse {
            xbar: x_hi,
            mu: hi,
            verbatim,
        });
    }
    Err(Error::MultiplierSearch {
        gap: -f_hi,
        iterations: config.max_mu_iter,
        mu: hi,
    })
}

/// Directional derivative of the surrogate at `x + t (xbar - x)`.
fn slope(problem: &SurrogateProblem<'_>, x: &PowerAllocation, xbar: &PowerAllocation, t: f64) -> f64 {
    let at = x.lerp(xbar, t);
    let g = problem.gradient(&at);
    let mut s = 0.0;
    for (k, gk) in g.iter().enumerate() {
        for ((gv, a), b) in gk.iter().zip(x.user(k)).zip(xbar.user(k)) {
            s += gv * (b - a);
        }
    }
    s
}

/// Longest step tried along `xbar - x`, in units of the full step.
const MAX_STEP: f64 = 8.0;

/// Largest `t <= MAX_STEP` keeping `x + t (xbar - x)` nonnegative and within
/// the budget; at least 1 since both ends are feasible.
fn max_step(x: &PowerAllocation, xbar: &PowerAllocation, p: f64) -> f64 {
    let mut t_max = MAX_STEP;
    let mut drift = 0.0;
    for (a, b) in x.as_slice().iter().zip(xbar.as_slice()) {
        let d = b - a;
        drift += d;
        if d < 0.0 {
            t_max = t_max.min(a / -d);
        }
    }
    if drift > 0.0 {
        t_max = t_max.min((p - x.total()).max(0.0) / drift);
    }
    t_max.max(1.0)
}

/// Exact line search along `xbar - x`: the maximizer of the concave
/// restriction to the feasible ray, found by expanding past the best
/// response while the surrogate still rises and then bracketing the zero of
/// the slope. `None` when no step raises the surrogate.
fn line_search(problem: &SurrogateProblem<'_>, x: &PowerAllocation, xbar: &PowerAllocation, c: f64) -> (f64, Option<(PowerAllocation, f64)>) {
    let s0 = slope(problem, x, xbar, 0.0);
    if !(s0 > 0.0) {
        return (0.0, None);
    }
    let t_max = max_step(x, xbar, problem.p);
    let (mut lo, mut f_lo) = (0.0, s0);
    let mut hi = 1.0;
    let mut f_hi = slope(problem, x, xbar, hi);
    while f_hi > 0.0 && hi < t_max {
        lo = hi;
        f_lo = f_hi;
        hi = (2.0 * hi).min(t_max);
        f_hi = slope(problem, x, xbar, hi);
    }
    let t = if f_hi >= 0.0 {
        hi
    } else {
        // Illinois on the decreasing slope
        let mut side = 0i8;
        for _ in 0..LINE_SEARCH_ITERS {
            let mut t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let st = slope(problem, x, xbar, t);
            if st > 0.0 {
                lo = t;
                f_lo = st;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = t;
                f_hi = st;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let cand = if t == 1.0 { xbar.clone() } else { x.lerp(xbar, t) };
    let cv = problem.value_nats(&cand) * BITS_PER_NAT;
    // an ascent direction cannot lower the surrogate; near the optimum the
    // gain drops below the resolution of `c`, so tolerate rounding
    if cv > c || (cv >= c - MONOTONE_SLACK && cand != *x) {
        return (t, Some((cand, cv)));
    }
    (t, None)
}

/// Runs water-filling sweeps from `x0` until the surrogate settles and the
/// stationarity certificate holds, or the sweep cap is reached.
///
/// `outer` labels trace rows with the enclosing CCCP iteration and
/// `iteration_base` offsets their global counter.
pub fn iwfa(
    problem: &SurrogateProblem<'_>,
    x0: &PowerAllocation,
    config: &SolverConfig,
    sink: &mut dyn TraceSink,
    outer: u64,
    iteration_base: u64,
) -> Result<IwfaOutcome> {
    let (k_users, m) = (problem.users(), problem.beams());
    if x0.users() != k_users || x0.beams() != m {
        return Err(Error::dim("initial point does not match the surrogate"));
    }
    x0.check_budget(problem.p)?;
    let km = (k_users * m) as f64;
    let min_step = 1.0 / km;
    let newton_iter = config.newton_max_iter();

    let mut x = x0.clone();
    let mut c = problem.value_nats(&x) * BITS_PER_NAT;
    let mut trace = vec![c];
    let mut certificate = KktCertificate::evaluate(problem, &x);
    let mut full_steps = 0;
    let mut verbatim_mu_sweeps = 0;
    let mut converged = false;
    let mut sweeps = 0;
    let mut warm_mu = None;

    for t in 1..=config.max_iwfa_sweeps {
        sweeps = t;
        let e = problem.denominators(&x);
        let mut residuals = Vec::with_capacity(k_users * m);
        for k in 0..k_users {
            for mi in 0..m {
                residuals.push(CoordinateResidual::build(problem, &e, &x, k, mi));
            }
        }
        let br = best_response(
            &Sweep {
                residuals,
                warm: x.as_slice(),
                p: problem.p,
                xi3: config.xi3,
                newton_iter,
            },
            config,
            warm_mu,
        )?;
        warm_mu = Some(br.mu);
        if br.verbatim {
            verbatim_mu_sweeps += 1;
        }
        let mut xbar = br.xbar;
        let total: f64 = xbar.iter().sum();
        if br.mu > 0.0 && total > 0.0 {
            // a binding budget is met exactly; the residual gap would
            // otherwise cost mu * gap of slope, which near the optimum
            // outweighs the ascent itself
            let scale = problem.p / total;
            xbar.iter_mut().for_each(|v| *v *= scale);
        }
        let xbar = PowerAllocation::new(k_users, m, xbar)?;

        let (step, mut next) = line_search(problem, &x, &xbar, c);
        if step >= 1.0 && next.is_some() {
            full_steps += 1;
        }
        if next.is_none() {
            // the averaged update always ascends in exact arithmetic; accept
            // it unless rounding makes it a visible decrease
            let cand = x.lerp(&xbar, min_step);
            let cv = problem.value_nats(&cand) * BITS_PER_NAT;
            if cv >= c - MONOTONE_SLACK {
                next = Some((cand, cv));
            }
        }
        let Some((x_new, c_new)) = next else {
            // no step improves the surrogate: x is already its maximizer
            certificate = KktCertificate::evaluate(problem, &x);
            converged = true;
            break;
        };
        let change = (c_new - c).abs();
        x = x_new;
        c = c_new;
        trace.push(c);
        certificate = KktCertificate::evaluate(problem, &x);
        if sink.enabled(LoopId::Iwfa) {
            sink.record(TraceRow {
                loop_id: LoopId::Iwfa,
                iteration: iteration_base + t as u64,
                outer,
                inner: t as u64,
                value: c,
                kkt_residual_max: Some(certificate.residual_max()),
                power_used: Some(certificate.power_used),
                mu: Some(br.mu),
            });
        }
        if change <= config.xi5 && certificate.residual_max() <= config.kkt_tol {
            converged = true;
            break;
        }
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("surrogate objective".into()));
    }
    Ok(IwfaOutcome {
        state: IwfaState {
            x,
            mu: certificate.mu,
            c_tilde: c,
            trace,
        },
        certificate,
        sweeps,
        converged,
        full_steps,
        verbatim_mu_sweeps,
    })
}
