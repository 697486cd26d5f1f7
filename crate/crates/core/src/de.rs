//! Deterministic equivalent of the ergodic term `E[log det(Kbar + G Lambda G^H)]`.
//!
//! For the jointly-correlated model every matrix in the fixed-point system is
//! diagonal, so the state is four vectors:
//!
//! ```text
//! Phi~  = I + eta~(Phi^{-1} Lambda) Kbar^{-1}        (receive side, N_r)
//! Phi   = I + eta(Phi~^{-1} Kbar^{-1}) Lambda         (transmit side, M)
//! Gamma = eta(Phi~^{-1} Kbar^{-1}),  Gamma~ = eta~(Phi^{-1} Lambda)
//! ```
//!
//! and the approximation is
//! `log det(I + Gamma Lambda) + log det(Gamma~ + Kbar) - tr(I - Phi~^{-1})`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math without std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::channel::CouplingMatrix;
use crate::rates::{eve_cov, interference_cov, DiagonalCovariance, PowerAllocation};
use crate::{Error, Result, BITS_PER_NAT};

/// Consecutive non-decreasing residuals after which damping switches on.
const OSCILLATION_WINDOW: usize = 50;
const DAMPING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    /// Stop once the largest update of `Phi~` is at most this.
    pub xi1: f64,
    pub max_iter: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            xi1: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicEquivalentState {
    /// diag `Gamma_k`, length M.
    pub gamma: Vec<f64>,
    /// diag `Gamma~_k`, length N_r.
    pub gamma_tilde: Vec<f64>,
    /// diag `Phi_k`, length M, all >= 1.
    pub phi_de: Vec<f64>,
    /// diag `Phi~_k`, length N_r, all >= 1.
    pub phi_tilde_de: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// `[eta(X~)]_mm = sum_n Omega_nm X~_nn`.
pub fn eta(omega: &CouplingMatrix, x_tilde: &[f64]) -> Result<Vec<f64>> {
    if x_tilde.len() != omega.rows() {
        return Err(Error::dim("eta: receive-side diagonal has wrong length"));
    }
    let mut out = vec![0.0; omega.cols()];
    for (n, &x) in x_tilde.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(omega.row(n)) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// `[eta~(X)]_nn = sum_m Omega_nm X_mm`.
pub fn eta_tilde(omega: &CouplingMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != omega.cols() {
        return Err(Error::dim("eta_tilde: transmit-side diagonal has wrong length"));
    }
    Ok((0..omega.rows())
        .map(|n| omega.row(n).iter().zip(x).map(|(w, v)| w * v).sum())
        .collect())
}

/// One sweep of the system starting from `phi_tilde`; returns
/// `(gamma, phi, gamma_tilde, next_phi_tilde)`.
fn sweep(omega: &CouplingMatrix, lambda: &[f64], kbar: &[f64], phi_tilde: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = phi_tilde.iter().zip(kbar).map(|(p, k)| 1.0 / (p * k)).collect();
    let gamma = eta(omega, &a).expect("shape checked by caller");
    let phi: Vec<f64> = gamma.iter().zip(lambda).map(|(g, l)| 1.0 + g * l).collect();
    let b: Vec<f64> = lambda.iter().zip(&phi).map(|(l, p)| l / p).collect();
    let gamma_tilde = eta_tilde(omega, &b).expect("shape checked by caller");
    let next = gamma_tilde.iter().zip(kbar).map(|(g, k)| 1.0 + g / k).collect();
    (gamma, phi, gamma_tilde, next)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves the fixed-point system for one user, starting from `Phi~ = I`.
pub fn de_fixed_point(
    omega_k: &CouplingMatrix,
    lambda_k: &[f64],
    kbar_k: &DiagonalCovariance,
    xi1: f64,
    max_iter: usize,
) -> Result<DeterministicEquivalentState> {
    de_fixed_point_traced(omega_k, lambda_k, kbar_k, xi1, max_iter, &mut |_, _| {})
}

/// [`de_fixed_point`] reporting `(iteration, residual)` after every update.
pub fn de_fixed_point_traced(
    omega_k: &CouplingMatrix,
    lambda_k: &[f64],
    kbar_k: &DiagonalCovariance,
    xi1: f64,
    max_iter: usize,
    hook: &mut dyn FnMut(usize, f64),
) -> Result<DeterministicEquivalentState> {
    let (n_r, m) = (omega_k.rows(), omega_k.cols());
    if lambda_k.len() != m || kbar_k.diag.len() != n_r {
        return Err(Error::dim("deterministic equivalent inputs disagree with coupling shape"));
    }
    if !(xi1 > 0.0) {
        return Err(Error::config("xi1 must be positive"));
    }
    if lambda_k.iter().any(|l| !(*l >= 0.0)) || kbar_k.diag.iter().any(|d| !(*d >= 1.0)) {
        return Err(Error::config("need lambda >= 0 and Kbar >= 1"));
    }
    let kbar = &kbar_k.diag;
    let mut phi_tilde = vec![1.0; n_r];
    let mut prev_residual = f64::INFINITY;
    let mut stalled = 0usize;
    let mut damping = 1.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let (_, _, _, next) = sweep(omega_k, lambda_k, kbar, &phi_tilde);
        residual = max_abs_diff(&next, &phi_tilde);
        hook(it, residual);
        if residual <= xi1 {
            phi_tilde = next;
            let (gamma, phi_de, gamma_tilde, _) = sweep(omega_k, lambda_k, kbar, &phi_tilde);
            return Ok(DeterministicEquivalentState {
                gamma,
                gamma_tilde,
                phi_de,
                phi_tilde_de: phi_tilde,
                residual,
                iterations: it,
            });
        }
        if residual >= prev_residual {
            stalled += 1;
            if stalled >= OSCILLATION_WINDOW {
                damping = DAMPING;
            }
        } else {
            stalled = 0;
        }
        prev_residual = residual;
        for (p, q) in phi_tilde.iter_mut().zip(&next) {
            *p += damping * (q - *p);
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::FixedPointNonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Largest violation of the four defining equations at `state`.
pub fn de_self_consistency(
    state: &DeterministicEquivalentState,
    omega_k: &CouplingMatrix,
    lambda_k: &[f64],
    kbar_k: &DiagonalCovariance,
) -> Result<f64> {
    let kbar = &kbar_k.diag;
    let inv_phi_lambda: Vec<f64> = lambda_k.iter().zip(&state.phi_de).map(|(l, p)| l / p).collect();
    let inv_phit_kbar: Vec<f64> = state.phi_tilde_de.iter().zip(kbar).map(|(p, k)| 1.0 / (p * k)).collect();
    let et = eta_tilde(omega_k, &inv_phi_lambda)?;
    let e = eta(omega_k, &inv_phit_kbar)?;
    let mut worst = 0.0f64;
    for n in 0..kbar.len() {
        worst = worst.max((state.phi_tilde_de[n] - (1.0 + et[n] / kbar[n])).abs());
        worst = worst.max((state.gamma_tilde[n] - et[n]).abs());
    }
    for m in 0..lambda_k.len() {
        worst = worst.max((state.phi_de[m] - (1.0 + e[m] * lambda_k[m])).abs());
        worst = worst.max((state.gamma[m] - e[m]).abs());
    }
    Ok(worst)
}

/// Deterministic equivalent of `E[log det(Kbar + G Lambda G^H)]`, in nats.
pub fn de_user_rate_nats(state: &DeterministicEquivalentState, lambda_k: &[f64], kbar_k: &DiagonalCovariance) -> f64 {
    let signal: f64 = state.gamma.iter().zip(lambda_k).map(|(g, l)| (g * l).ln_1p()).sum();
    let receive: f64 = state.gamma_tilde.iter().zip(&kbar_k.diag).map(|(g, k)| (g + k).ln()).sum();
    let correction: f64 = state.phi_tilde_de.iter().map(|p| 1.0 - 1.0 / p).sum();
    signal + receive - correction
}

/// [`de_user_rate_nats`] in bits.
pub fn de_user_rate(state: &DeterministicEquivalentState, lambda_k: &[f64], kbar_k: &DiagonalCovariance) -> f64 {
    de_user_rate_nats(state, lambda_k, kbar_k) * BITS_PER_NAT
}

/// Per-user pieces of the deterministic secrecy lower bound, in bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeUserTerm {
    /// Deterministic equivalent of `E[log det(Kbar_k + G_k Lambda_k G_k^H)]`.
    pub r1: f64,
    /// `log det Kbar_k + log det Kbar_eve,k`.
    pub r2: f64,
    /// `r1 - r2`, unclamped.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeLowerBound {
    /// `sum_k [r1 - r2]^+`, bits.
    pub value: f64,
    /// `sum_k (r1 - r2)`, bits; the quantity the optimizer ascends.
    pub unclamped: f64,
    pub per_user: Vec<DeUserTerm>,
    pub states: Vec<DeterministicEquivalentState>,
    pub kbar: Vec<DiagonalCovariance>,
}

/// Deterministic equivalent of the secrecy sum-rate lower bound.
pub fn de_secrecy_lower_bound(
    alloc: &PowerAllocation,
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    config: &DeConfig,
) -> Result<DeLowerBound> {
    de_secrecy_lower_bound_traced(alloc, omegas, omega_eve, config, &mut |_, _, _| {})
}

/// As [`de_secrecy_lower_bound`], reporting `(user, iteration, residual)` of
/// every fixed-point update.
pub fn de_secrecy_lower_bound_traced(
    alloc: &PowerAllocation,
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    config: &DeConfig,
    hook: &mut dyn FnMut(usize, usize, f64),
) -> Result<DeLowerBound> {
    if omegas.len() != alloc.users() {
        return Err(Error::dim("one coupling matrix per user required"));
    }
    if omega_eve.cols() != alloc.beams() {
        return Err(Error::dim("eavesdropper coupling disagrees on M"));
    }
    let mut per_user = Vec::with_capacity(omegas.len());
    let mut states = Vec::with_capacity(omegas.len());
    let mut kbars = Vec::with_capacity(omegas.len());
    for (k, omega) in omegas.iter().enumerate() {
        let kbar = interference_cov(alloc, k, omega)?;
        let lambda = alloc.user(k);
        let state = de_fixed_point_traced(omega, lambda, &kbar, config.xi1, config.max_iter, &mut |it, r| {
            hook(k, it, r)
        })?;
        let r1 = de_user_rate(&state, lambda, &kbar);
        let r2 = kbar.logdet_bits() + eve_cov(lambda, omega_eve).logdet_bits();
        per_user.push(DeUserTerm { r1, r2, margin: r1 - r2 });
        states.push(state);
        kbars.push(kbar);
    }
    let value = per_user.iter().map(|t| t.margin.max(0.0)).sum();
    let unclamped = per_user.iter().map(|t| t.margin).sum();
    Ok(DeLowerBound {
        value,
        unclamped,
        per_user,
        states,
        kbar: kbars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[f64]]) -> CouplingMatrix {
        CouplingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn eta_examples() {
        let o = cm(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(eta(&o, &[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        assert_eq!(eta(&o, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(eta(&o, &[1.0, 2.0]).unwrap(), vec![7.0, 10.0]);
        assert!(eta(&o, &[1.0]).is_err());
        assert_eq!(eta_tilde(&o, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(eta_tilde(&o, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(eta_tilde(&o, &[2.0, 1.0]).unwrap(), vec![4.0, 10.0]);
    }

    #[test]
    fn zero_power_collapses_in_one_iteration() {
        let o = cm(&[&[1.0, 2.0, 0.5], &[3.0, 4.0, 0.0]]);
        let kbar = DiagonalCovariance { diag: vec![2.0, 4.0] };
        let s = de_fixed_point(&o, &[0.0; 3], &kbar, 1e-10, 100).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.phi_de, vec![1.0; 3]);
        assert_eq!(s.phi_tilde_de, vec![1.0; 2]);
        assert_eq!(s.gamma_tilde, vec![0.0; 2]);
        assert_eq!(s.gamma, eta(&o, &[0.5, 0.25]).unwrap());
        let r = de_user_rate(&s, &[0.0; 3], &kbar);
        assert!((r - kbar.logdet_bits()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let o = cm(&[&[1.0]]);
        let k = DiagonalCovariance::identity(1);
        assert!(de_fixed_point(&o, &[-1.0], &k, 1e-10, 10).is_err());
        assert!(de_fixed_point(&o, &[1.0], &DiagonalCovariance { diag: vec![0.5] }, 1e-10, 10).is_err());
        assert!(de_fixed_point(&o, &[1.0], &k, 0.0, 10).is_err());
        assert!(matches!(
            de_fixed_point(&o, &[100.0], &k, 1e-300, 3),
            Err(Error::FixedPointNonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn scalar_system_residual_oracle() {
        // M = N_r = 1: substitute the state back into the scalar equations
        let (w, p) = (1.7, 10.0);
        let o = cm(&[&[w]]);
        let k = DiagonalCovariance::identity(1);
        let s = de_fixed_point(&o, &[p], &k, 1e-12, 10_000).unwrap();
        let (g, gt, ph, pht) = (s.gamma[0], s.gamma_tilde[0], s.phi_de[0], s.phi_tilde_de[0]);
        assert!((pht - (1.0 + w * p / ph)).abs() <= 1e-10);
        assert!((ph - (1.0 + w / pht * p)).abs() <= 1e-10);
        assert!((g - w / pht).abs() <= 1e-10);
        assert!((gt - w * p / ph).abs() <= 1e-10);
    }
}
