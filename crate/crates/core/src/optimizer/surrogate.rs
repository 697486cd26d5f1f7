//! The per-iteration concave surrogate and its coordinate residuals.
//!
//! With `Gamma`, `Gamma~` taken from the deterministic equivalent at
//! `Lambda^(i)` and the subtracted log-det terms linearized (`Delta`), the
//! problem solved in one CCCP step is
//!
//! ```text
//! max  sum_k [ sum_m ln(1 + g_km x_km) + sum_j ln(gt_kj + Kbar_kj(X)) - sum_m d_km x_km ]
//! s.t. x >= 0, sum x <= P
//! ```
//!
//! where `Kbar_kj(X) = 1 + sum_m w_kjm (S_m - x_km)` and `S_m` is the total
//! power on beam `m`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::channel::CouplingMatrix;
use crate::de::DeterministicEquivalentState;
use crate::rates::{eve_cov, interference_cov, PowerAllocation};
use crate::{Error, Result, BITS_PER_NAT};

/// Gradient of `sum_l (ln det Kbar_l + ln det Kbar_eve,l)` with respect to
/// each `lambda_{k,m}`, in nats: one length-M vector per user.
pub fn delta_matrices(alloc: &PowerAllocation, omegas: &[CouplingMatrix], omega_eve: &CouplingMatrix) -> Result<Vec<Vec<f64>>> {
    let (k_users, m) = (alloc.users(), alloc.beams());
    if omegas.len() != k_users || omegas.iter().any(|o| o.cols() != m) || omega_eve.cols() != m {
        return Err(Error::dim("coupling matrices and allocation disagree"));
    }
    // own[l][m] = sum_j w_ljm / Kbar_lj
    let mut own = Vec::with_capacity(k_users);
    let mut total = vec![0.0; m];
    for (l, omega) in omegas.iter().enumerate() {
        let kbar = interference_cov(alloc, l, omega)?;
        let mut v = vec![0.0; m];
        for (j, d) in kbar.diag.iter().enumerate() {
            for (vm, w) in v.iter_mut().zip(omega.row(j)) {
                *vm += w / d;
            }
        }
        for (t, x) in total.iter_mut().zip(&v) {
            *t += x;
        }
        own.push(v);
    }
    let mut out = Vec::with_capacity(k_users);
    for (k, own_k) in own.iter().enumerate() {
        let eve = eve_cov(alloc.user(k), omega_eve);
        let mut d: Vec<f64> = total.iter().zip(own_k).map(|(t, o)| (t - o).max(0.0)).collect();
        for (j, e) in eve.diag.iter().enumerate() {
            for (dm, w) in d.iter_mut().zip(omega_eve.row(j)) {
                *dm += w / e;
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// The data frozen for one CCCP iteration.
#[derive(Clone, Debug)]
pub struct SurrogateProblem<'a> {
    pub omegas: &'a [CouplingMatrix],
    /// `gamma[k][m]`.
    pub gamma: Vec<Vec<f64>>,
    /// `gamma_tilde[k][j]`.
    pub gamma_tilde: Vec<Vec<f64>>,
    /// `delta[k][m]`, nats.
    pub delta: Vec<Vec<f64>>,
    pub p: f64,
}

impl<'a> SurrogateProblem<'a> {
    pub fn new(
        omegas: &'a [CouplingMatrix],
        states: &[DeterministicEquivalentState],
        delta: Vec<Vec<f64>>,
        p: f64,
    ) -> Result<Self> {
        if states.len() != omegas.len() || delta.len() != omegas.len() {
            return Err(Error::dim("one state and one delta vector per user required"));
        }
        Ok(Self {
            omegas,
            gamma: states.iter().map(|s| s.gamma.clone()).collect(),
            gamma_tilde: states.iter().map(|s| s.gamma_tilde.clone()).collect(),
            delta,
            p,
        })
    }

    pub fn users(&self) -> usize {
        self.omegas.len()
    }

    pub fn beams(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    /// `Kbar_kj(X)` for every user.
    pub fn kbar(&self, x: &PowerAllocation) -> Vec<Vec<f64>> {
        let totals = x.beam_totals();
        (0..self.users())
            .map(|k| {
                let omega = &self.omegas[k];
                let xk = x.user(k);
                (0..omega.rows())
                    .map(|j| {
                        1.0 + omega
                            .row(j)
                            .iter()
                            .zip(totals.iter().zip(xk))
                            .map(|(w, (s, v))| w * (s - v))
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// `E_lj = gt_lj + Kbar_lj(X)`, the receive-side denominators at `X`.
    pub fn denominators(&self, x: &PowerAllocation) -> Vec<Vec<f64>> {
        let mut e = self.kbar(x);
        for (row, gt) in e.iter_mut().zip(&self.gamma_tilde) {
            for (v, g) in row.iter_mut().zip(gt) {
                *v += g;
            }
        }
        e
    }

    /// Surrogate value in nats.
    pub fn value_nats(&self, x: &PowerAllocation) -> f64 {
        let e = self.denominators(x);
        let mut total = 0.0;
        for k in 0..self.users() {
            for ((g, d), v) in self.gamma[k].iter().zip(&self.delta[k]).zip(x.user(k)) {
                total += (g * v).ln_1p() - d * v;
            }
            total += e[k].iter().map(|v| v.ln()).sum::<f64>();
        }
        total
    }

    /// Partial derivatives of the surrogate at `X`, nats.
    pub fn gradient(&self, x: &PowerAllocation) -> Vec<Vec<f64>> {
        let e = self.denominators(x);
        let (k_users, m) = (self.users(), self.beams());
        // cross[m] = sum_l sum_j w_ljm / E_lj, own term removed per user below
        let mut per_user = vec![vec![0.0; m]; k_users];
        let mut cross = vec![0.0; m];
        for l in 0..k_users {
            let omega = &self.omegas[l];
            for (j, ej) in e[l].iter().enumerate() {
                for (c, w) in per_user[l].iter_mut().zip(omega.row(j)) {
                    *c += w / ej;
                }
            }
            for (c, v) in cross.iter_mut().zip(&per_user[l]) {
                *c += v;
            }
        }
        (0..k_users)
            .map(|k| {
                (0..m)
                    .map(|mi| {
                        let g = self.gamma[k][mi];
                        g / (1.0 + g * x.get(k, mi)) - self.delta[k][mi] + (cross[mi] - per_user[k][mi])
                    })
                    .collect()
            })
            .collect()
    }
}

/// Surrogate objective in bits.
pub fn surrogate_objective(x: &PowerAllocation, problem: &SurrogateProblem<'_>) -> f64 {
    problem.value_nats(x) * BITS_PER_NAT
}

/// The stationarity residual of one coordinate with every other coordinate
/// frozen at the sweep's snapshot.
///
/// `rho(x) = g/(1+g x) - d - mu + sum_{l != k, j} r/(D + r x)`, with `D`
/// absorbing the snapshot value of the coordinate itself.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateResidual {
    pub gamma: f64,
    pub delta: f64,
    /// `(r, D)` pairs with `r > 0`.
    pub terms: Vec<(f64, f64)>,
}

impl CoordinateResidual {
    /// Builds the residual of `(k, m)` from precomputed denominators
    /// `E_lj = gt_lj + Kbar_lj(X^t)`.
    pub fn build(problem: &SurrogateProblem<'_>, denominators: &[Vec<f64>], x_all: &PowerAllocation, k: usize, m: usize) -> Self {
        let base = x_all.get(k, m);
        let mut terms = Vec::new();
        for (l, omega) in problem.omegas.iter().enumerate() {
            if l == k {
                continue;
            }
            for (j, e) in denominators[l].iter().enumerate() {
                let r = omega.get(j, m);
                if r > 0.0 {
                    terms.push((r, e - r * base));
                }
            }
        }
        Self {
            gamma: problem.gamma[k][m],
            delta: problem.delta[k][m],
            terms,
        }
    }

    /// `(rho, rho')` at `x` for multiplier `mu`.
    #[inline]
    pub fn eval(&self, x: f64, mu: f64) -> (f64, f64) {
        let s = 1.0 + self.gamma * x;
        let mut rho = self.gamma / s - self.delta - mu;
        let mut drho = -(self.gamma * self.gamma) / (s * s);
        for &(r, d) in &self.terms {
            let q = 1.0 / (d + r * x);
            rho += r * q;
            drho -= r * r * q * q;
        }
        (rho, drho)
    }

    /// `rho` alone at `x` for multiplier `mu`.
    #[inline]
    pub fn value(&self, x: f64, mu: f64) -> f64 {
        let mut rho = self.gamma / (1.0 + self.gamma * x) - self.delta - mu;
        for &(r, d) in &self.terms {
            rho += r / (d + r * x);
        }
        rho
    }
}

/// `(rho_km(x), rho'_km(x))` with every other coordinate at `x_all`.
pub fn water_fill_residual(
    x: f64,
    k: usize,
    m: usize,
    problem: &SurrogateProblem<'_>,
    mu: f64,
    x_all: &PowerAllocation,
) -> (f64, f64) {
    let e = problem.denominators(x_all);
    CoordinateResidual::build(problem, &e, x_all, k, m).eval(x, mu)
}

/// Root of a strictly decreasing residual on `[0, inf)`, clamped at zero.
///
/// Brackets the root by doubling, then hands over to
/// [`newton_root_bracketed`]. Returns [`Error::NoBracket`] when the residual
/// stays positive for every representable `x`.
pub fn newton_root(f: impl Fn(f64) -> (f64, f64), x0: f64, xi3: f64, max_iter: usize) -> Result<f64> {
    let (f0, _) = f(0.0);
    if !f0.is_finite() {
        return Err(Error::NonFinite("residual at zero".into()));
    }
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = x0.max(1.0);
    loop {
        let (fh, _) = f(hi);
        if fh <= 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoBracket);
        }
    }
    Ok(newton_root_bracketed(f, lo, hi, x0, xi3, max_iter))
}

/// Newton iteration from `x0` inside a known bracket (`f(lo) > 0 >= f(hi)`).
///
/// The bracket shrinks at every evaluation; a step that leaves it is replaced
/// by bisection, and after `max_iter` Newton steps bisection finishes alone.
/// Stops once a step is at most `xi3`.
pub fn newton_root_bracketed(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, x0: f64, xi3: f64, max_iter: usize) -> f64 {
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    let mut newton_steps = 0usize;
    loop {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        newton_steps += 1;
        if newton_steps > max_iter || !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= xi3 || hi - lo <= xi3 {
            return next.max(0.0);
        }
        x = next;
    }
}
