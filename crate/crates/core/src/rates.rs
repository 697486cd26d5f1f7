//! Ergodic rates: closed-form covariance terms and Monte-Carlo estimators.
//!
//! All rates returned from this module are in bits per channel use. Noise is
//! normalized to unit variance, so the interference-plus-noise covariances are
//! identity plus a nonnegative diagonal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // float math without std
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_beam_channel, CouplingMatrix};
use crate::linalg::hermitian_logdet;
use crate::rng::{Domain, SeedSpace};
use crate::{Error, Result, BITS_PER_NAT};

/// Relative slack allowed on the power budget.
pub const POWER_SLACK: f64 = 1e-9;

/// Per-user diagonal beam powers, `K` rows of `M` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    k: usize,
    m: usize,
    lambdas: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            k,
            m,
            lambdas: vec![0.0; k * m],
        }
    }

    pub fn new(k: usize, m: usize, lambdas: Vec<f64>) -> Result<Self> {
        if k == 0 || m == 0 || lambdas.len() != k * m {
            return Err(Error::dim(format!(
                "allocation for K={k}, M={m} needs {} entries, got {}",
                k * m,
                lambdas.len()
            )));
        }
        if let Some(i) = lambdas.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!(
                "allocation entry {i} is {} (must be finite and >= 0)",
                lambdas[i]
            )));
        }
        Ok(Self { k, m, lambdas })
    }

    pub fn from_users(users: &[Vec<f64>]) -> Result<Self> {
        let m = users.first().map_or(0, Vec::len);
        if users.iter().any(|u| u.len() != m) {
            return Err(Error::dim("users have allocations of different length"));
        }
        Self::new(users.len(), m, users.concat())
    }

    /// New allocation, checked against the budget `p`.
    pub fn with_budget(k: usize, m: usize, lambdas: Vec<f64>, p: f64) -> Result<Self> {
        let a = Self::new(k, m, lambdas)?;
        a.check_budget(p)?;
        Ok(a)
    }

    pub fn check_budget(&self, p: f64) -> Result<()> {
        let total = self.total();
        if total > p * (1.0 + POWER_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::config(format!("allocation uses {total} > budget {p}")));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.k
    }

    pub fn beams(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn user(&self, k: usize) -> &[f64] {
        &self.lambdas[k * self.m..(k + 1) * self.m]
    }

    #[inline]
    pub fn user_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.lambdas[k * self.m..(k + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.lambdas[k * self.m + m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.lambdas
    }

    pub fn total(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Per-beam sum over all users.
    pub fn beam_totals(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.m];
        for k in 0..self.k {
            for (t, v) in s.iter_mut().zip(self.user(k)) {
                *t += v;
            }
        }
        s
    }

    /// `Lambda_{\k}`: sum of every user's powers except `k`.
    pub fn complement(&self, k: usize) -> Vec<f64> {
        let mut s = self.beam_totals();
        for (t, v) in s.iter_mut().zip(self.user(k)) {
            *t -= v;
            if *t < 0.0 {
                *t = 0.0;
            }
        }
        s
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &PowerAllocation, t: f64) -> PowerAllocation {
        let lambdas = self
            .lambdas
            .iter()
            .zip(&other.lambdas)
            .map(|(a, b)| ((1.0 - t) * a + t * b).max(0.0))
            .collect();
        PowerAllocation {
            k: self.k,
            m: self.m,
            lambdas,
        }
    }
}

/// Diagonal covariance `I + nonnegative diagonal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCovariance {
    pub diag: Vec<f64>,
}

impl DiagonalCovariance {
    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn logdet_nats(&self) -> f64 {
        self.diag.iter().map(|d| d.ln()).sum()
    }

    pub fn logdet_bits(&self) -> f64 {
        self.logdet_nats() * BITS_PER_NAT
    }
}

/// `1 + omega * load` for every row of `omega`.
pub(crate) fn loaded_diag(omega: &CouplingMatrix, load: &[f64]) -> Vec<f64> {
    (0..omega.rows())
        .map(|n| 1.0 + omega.row(n).iter().zip(load).map(|(w, l)| w * l).sum::<f64>())
        .collect()
}

/// Interference-plus-noise covariance of user `k` in its eigen domain,
/// `I + sum_{i != k} E[G_k Lambda_i G_k^H]`.
pub fn interference_cov(alloc: &PowerAllocation, k: usize, omega_k: &CouplingMatrix) -> Result<DiagonalCovariance> {
    if k >= alloc.users() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: alloc.users(),
        });
    }
    if omega_k.cols() != alloc.beams() {
        return Err(Error::dim("coupling matrix and allocation disagree on M"));
    }
    Ok(DiagonalCovariance {
        diag: loaded_diag(omega_k, &alloc.complement(k)),
    })
}

/// `I + E[G_eve Lambda_k G_eve^H]`.
pub fn eve_cov(alloc_k: &[f64], omega_eve: &CouplingMatrix) -> DiagonalCovariance {
    debug_assert_eq!(alloc_k.len(), omega_eve.cols());
    DiagonalCovariance {
        diag: loaded_diag(omega_eve, alloc_k),
    }
}

/// Jensen upper bound on the eavesdropper's ergodic capacity for user `k`'s
/// signal, in bits.
pub fn eve_rate_upper_bound(alloc_k: &[f64], omega_eve: &CouplingMatrix) -> f64 {
    eve_cov(alloc_k, omega_eve).logdet_bits()
}

/// `log2 det(I + Kbar^{-1} G Lambda G^H)` for one channel draw.
pub fn rate_sample_bits(g: &crate::linalg::CMatrix, lambda: &[f64], kbar: &[f64]) -> f64 {
    if lambda.iter().all(|&l| l == 0.0) {
        return 0.0;
    }
    let col: Vec<f64> = lambda.iter().map(|l| l.sqrt()).collect();
    let row: Vec<f64> = kbar.iter().map(|d| 1.0 / d.sqrt()).collect();
    let b = g.scale_columns(&col).scale_rows(&row);
    // I + B B^H is Hermitian positive definite by construction
    hermitian_logdet(&b.gram_plus_identity()).unwrap_or(f64::NAN) * BITS_PER_NAT
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            samples: 0,
        }
    }
}

/// Streaming mean/variance accumulator (Welford, with Chan's merge).
///
/// Merging partial accumulators in a fixed order gives bit-identical results
/// regardless of how many workers produced them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct McAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl McAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &McAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: se,
            samples: self.n,
        }
    }
}

/// User `k`'s rate over the sample indices in `range`.
pub fn user_rate_mc_range(
    alloc: &PowerAllocation,
    k: usize,
    omega_k: &CouplingMatrix,
    seeds: &SeedSpace,
    range: Range<u64>,
) -> Result<McAccumulator> {
    let kbar = interference_cov(alloc, k, omega_k)?;
    let lambda = alloc.user(k);
    let mut acc = McAccumulator::default();
    for idx in range {
        let g = sample_beam_channel(omega_k, &mut seeds.stream(Domain::UserChannel, k, idx));
        acc.push(rate_sample_bits(&g.entries, lambda, &kbar.diag));
    }
    Ok(acc)
}

/// Eavesdropper's rate on user `k`'s signal over the sample indices in `range`.
pub fn eve_rate_mc_range(
    alloc_k: &[f64],
    k: usize,
    omega_eve: &CouplingMatrix,
    seeds: &SeedSpace,
    range: Range<u64>,
) -> McAccumulator {
    let ones = vec![1.0; omega_eve.rows()];
    let mut acc = McAccumulator::default();
    for idx in range {
        let g = sample_beam_channel(omega_eve, &mut seeds.stream(Domain::EveChannel, k, idx));
        acc.push(rate_sample_bits(&g.entries, alloc_k, &ones));
    }
    acc
}

/// Ergodic rate of user `k`,
/// `E[log2 det(I + Kbar_k^{-1} G_k Lambda_k G_k^H)]`, over `samples` draws.
pub fn user_rate_mc(
    alloc: &PowerAllocation,
    k: usize,
    omega_k: &CouplingMatrix,
    samples: u64,
    seeds: &SeedSpace,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::config("Monte-Carlo needs at least one sample"));
    }
    Ok(user_rate_mc_range(alloc, k, omega_k, seeds, 0..samples)?.estimate())
}

/// Eavesdropper's ergodic capacity on user `k`'s signal,
/// `E[log2 det(I + G_eve Lambda_k G_eve^H)]`.
pub fn eve_rate_mc(alloc_k: &[f64], k: usize, omega_eve: &CouplingMatrix, samples: u64, seeds: &SeedSpace) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::config("Monte-Carlo needs at least one sample"));
    }
    Ok(eve_rate_mc_range(alloc_k, k, omega_eve, seeds, 0..samples).estimate())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `R_k`, Monte-Carlo.
    pub per_user_rate: Vec<Estimate>,
    /// `C^eve_{k,ub}`, closed form.
    pub per_user_eve_bound: Vec<f64>,
    /// `C^eve_k`, Monte-Carlo, when requested.
    pub per_user_eve_mc: Option<Vec<Estimate>>,
    /// `sum_k [R_k - C^eve_{k,ub}]^+`.
    pub secrecy_sum_rate_lb: Estimate,
    /// `sum_k [R_k - C^eve_k]^+`.
    pub secrecy_sum_rate_mc: Option<Estimate>,
}

fn clamped_sum(terms: impl Iterator<Item = (f64, f64)>) -> Estimate {
    let mut mean = 0.0;
    let mut var = 0.0;
    for (value, se) in terms {
        if value > 0.0 {
            mean += value;
            var += se * se;
        }
    }
    Estimate {
        mean,
        std_error: var.sqrt(),
        samples: 0,
    }
}

impl RateReport {
    /// Builds the report from per-user pieces, clamping each secrecy term at 0.
    pub fn assemble(per_user_rate: Vec<Estimate>, per_user_eve_bound: Vec<f64>, per_user_eve_mc: Option<Vec<Estimate>>) -> Self {
        let samples = per_user_rate.first().map_or(0, |e| e.samples);
        let mut lb = clamped_sum(
            per_user_rate
                .iter()
                .zip(&per_user_eve_bound)
                .map(|(r, c)| (r.mean - c, r.std_error)),
        );
        lb.samples = samples;
        let mc = per_user_eve_mc.as_ref().map(|eve| {
            let mut e = clamped_sum(per_user_rate.iter().zip(eve).map(|(r, c)| {
                (r.mean - c.mean, (r.std_error * r.std_error + c.std_error * c.std_error).sqrt())
            }));
            e.samples = samples;
            e
        });
        Self {
            per_user_rate,
            per_user_eve_bound,
            per_user_eve_mc,
            secrecy_sum_rate_lb: lb,
            secrecy_sum_rate_mc: mc,
        }
    }

    /// Recomputes `sum_k [R_k - C^eve_{k,ub}]^+` from the stored per-user terms.
    pub fn recompute_lb(&self) -> f64 {
        self.per_user_rate
            .iter()
            .zip(&self.per_user_eve_bound)
            .map(|(r, c)| (r.mean - c).max(0.0))
            .sum()
    }
}

/// Shape agreement between an allocation and its coupling matrices.
pub fn check_instance(alloc: &PowerAllocation, omegas: &[CouplingMatrix], omega_eve: &CouplingMatrix) -> Result<()> {
    if omegas.len() != alloc.users() {
        return Err(Error::dim("one coupling matrix per user required"));
    }
    let m = alloc.beams();
    if omegas.iter().any(|o| o.cols() != m) || omega_eve.cols() != m {
        return Err(Error::dim("coupling matrices and allocation disagree on M"));
    }
    Ok(())
}

/// Secrecy sum-rate and its lower bound, serial Monte-Carlo.
///
/// `eve_mc` selects whether the eavesdropper's exact ergodic capacity is also
/// estimated (needed for `R_sec`, not for the lower bound).
pub fn secrecy_rates(
    alloc: &PowerAllocation,
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    samples: u64,
    seeds: &SeedSpace,
    eve_mc: bool,
) -> Result<RateReport> {
    check_instance(alloc, omegas, omega_eve)?;
    let rates = (0..alloc.users())
        .map(|k| user_rate_mc(alloc, k, &omegas[k], samples, seeds))
        .collect::<Result<Vec<_>>>()?;
    let bounds = (0..alloc.users())
        .map(|k| eve_rate_upper_bound(alloc.user(k), omega_eve))
        .collect();
    let eve = if eve_mc {
        Some(
            (0..alloc.users())
                .map(|k| eve_rate_mc(alloc.user(k), k, omega_eve, samples, seeds))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(RateReport::assemble(rates, bounds, eve))
}
