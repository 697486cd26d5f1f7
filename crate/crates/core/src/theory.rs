//! Executable checks of the structural results behind the solver, plus an
//! independent projected-gradient optimizer used as an oracle.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // float math without std
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{beam_gains, sample_beam_channel, CouplingMatrix};
use crate::linalg::{haar_unitary, CMatrix};
use crate::rates::{eve_rate_upper_bound, interference_cov, rate_sample_bits, McAccumulator, PowerAllocation};
use crate::rng::{Domain, SeedSpace};
use crate::{Error, Result};

/// Beams that carry no power at the optimum for single-antenna users.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    /// `(k, m)` pairs with `[R~_eve]_m >= [R~_k]_m`.
    pub excluded: Vec<(usize, usize)>,
    /// `margins[k][m] = [R~_k]_m - [R~_eve]_m`.
    pub margins: Vec<Vec<f64>>,
}

impl ExclusionReport {
    /// Total power `alloc` puts on excluded pairs.
    pub fn excluded_power(&self, alloc: &PowerAllocation) -> f64 {
        self.excluded.iter().map(|&(k, m)| alloc.get(k, m)).sum()
    }
}

/// Excluded `(user, beam)` pairs. Only defined for single-antenna users.
pub fn theorem2_excluded_beams(omegas: &[CouplingMatrix], omega_eve: &CouplingMatrix) -> Result<ExclusionReport> {
    if omegas.iter().any(|o| o.rows() != 1) {
        return Err(Error::Scope("beam exclusion is only established for single-antenna users".into()));
    }
    if omegas.iter().any(|o| o.cols() != omega_eve.cols()) {
        return Err(Error::dim("coupling matrices disagree on M"));
    }
    let eve = beam_gains(omega_eve).gains;
    let mut excluded = Vec::new();
    let mut margins = Vec::with_capacity(omegas.len());
    for (k, omega) in omegas.iter().enumerate() {
        let g = beam_gains(omega).gains;
        let mk: Vec<f64> = g.iter().zip(&eve).map(|(a, b)| a - b).collect();
        excluded.extend(mk.iter().enumerate().filter(|(_, v)| **v <= 0.0).map(|(m, _)| (k, m)));
        margins.push(mk);
    }
    Ok(ExclusionReport { excluded, margins })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// `E[x / (a + b x)]`.
    pub lhs: f64,
    /// `E[xbar / (a + b x)]`.
    pub rhs: f64,
    /// Standard error of `rhs - lhs` (zero for exact enumeration).
    pub std_error: f64,
    pub holds: bool,
}

/// Monte-Carlo check of `E[x/(a+bx)] <= E[xbar/(a+bx)]`, `xbar = E[x]`.
///
/// `mean` is the exact mean when known; otherwise the sample mean is used.
pub fn lemma1_check<R: Rng + ?Sized>(
    mut sampler: impl FnMut(&mut R) -> f64,
    rng: &mut R,
    a: f64,
    b: f64,
    samples: usize,
    mean: Option<f64>,
) -> Result<Lemma1Report> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::config("need a > 0 and b > 0"));
    }
    if samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    let xs: Vec<f64> = (0..samples).map(|_| sampler(rng)).collect();
    if xs.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::config("samples must be finite and nonnegative"));
    }
    let xbar = mean.unwrap_or_else(|| {
        let mut acc = McAccumulator::default();
        xs.iter().for_each(|x| acc.push(*x));
        acc.estimate().mean
    });
    let (mut l, mut r, mut d) = (McAccumulator::default(), McAccumulator::default(), McAccumulator::default());
    for &x in &xs {
        let den = a + b * x;
        l.push(x / den);
        r.push(xbar / den);
        d.push((xbar - x) / den);
    }
    let (lhs, rhs) = (l.estimate().mean, r.estimate().mean);
    let se = d.estimate().std_error;
    Ok(Lemma1Report {
        lhs,
        rhs,
        std_error: se,
        holds: lhs <= rhs + 3.0 * se,
    })
}

/// Exact version over a finite support of `(value, probability)` pairs.
pub fn lemma1_exact(support: &[(f64, f64)], a: f64, b: f64) -> Result<Lemma1Report> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::config("need a > 0 and b > 0"));
    }
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    if support.is_empty() || (total - 1.0).abs() > 1e-12 || support.iter().any(|(x, p)| *x < 0.0 || *p < 0.0) {
        return Err(Error::config("support must be nonnegative with probabilities summing to 1"));
    }
    let xbar = if support.len() == 1 {
        support[0].0
    } else {
        support.iter().map(|(x, p)| x * p).sum()
    };
    let lhs = support.iter().map(|(x, p)| p * x / (a + b * x)).sum::<f64>();
    let rhs = support.iter().map(|(x, p)| p * xbar / (a + b * x)).sum::<f64>();
    Ok(Lemma1Report {
        lhs,
        rhs,
        std_error: 0.0,
        holds: lhs <= rhs,
    })
}

/// Paired comparison of the Monte-Carlo secrecy lower bound under the
/// diagonal input covariances `Lambda_k` and under `W Lambda_k W^H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationTrial {
    pub diagonal: f64,
    pub rotated: f64,
    /// Standard error of `diagonal - rotated` from the paired draws.
    pub std_error: f64,
    pub diagonal_wins: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub trials: Vec<RotationTrial>,
    pub win_fraction: f64,
    pub passes: bool,
}

/// Fraction of rotations the diagonal configuration must win or tie.
pub const ROTATION_PASS_LEVEL: f64 = 0.95;

/// Secrecy lower bound with `Q_k = W Lambda_k W^H` against `W = I`, both
/// evaluated on the same channel draws.
///
/// Independent beam-domain entries make `E[G Q G^H]` depend only on the
/// diagonal of `Q`, so the interference and eavesdropper covariances use
/// `diag(W Lambda_k W^H)`; the legitimate rate uses the full `Q` through
/// `G W`.
pub fn rotation_trial(
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    alloc: &PowerAllocation,
    w: &CMatrix,
    samples: u64,
    seeds: &SeedSpace,
) -> Result<RotationTrial> {
    let (k_users, m) = (alloc.users(), alloc.beams());
    if omegas.len() != k_users || w.rows() != m || w.cols() != m || omega_eve.cols() != m {
        return Err(Error::dim("rotation trial inputs disagree on shape"));
    }
    if samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    // diag(W Lambda W^H)[n] = sum_m |W_nm|^2 lambda_m
    let rotated_diag: Vec<Vec<f64>> = (0..k_users)
        .map(|k| {
            (0..m)
                .map(|n| w.row(n).iter().zip(alloc.user(k)).map(|(z, l)| z.norm_sqr() * l).sum())
                .collect()
        })
        .collect();
    let rot_alloc = PowerAllocation::from_users(&rotated_diag)?;

    let mut lb_diag = 0.0;
    let mut lb_rot = 0.0;
    let mut var = 0.0;
    for (k, omega) in omegas.iter().enumerate() {
        let kbar_d = interference_cov(alloc, k, omega)?;
        let kbar_r = interference_cov(&rot_alloc, k, omega)?;
        let c_d = eve_rate_upper_bound(alloc.user(k), omega_eve);
        let c_r = eve_rate_upper_bound(rot_alloc.user(k), omega_eve);
        let (mut rd, mut rr, mut diff) = (McAccumulator::default(), McAccumulator::default(), McAccumulator::default());
        for s in 0..samples {
            let g = sample_beam_channel(omega, &mut seeds.stream(Domain::UserChannel, k, s)).entries;
            let gw = g.mul(w)?;
            let a = rate_sample_bits(&g, alloc.user(k), &kbar_d.diag);
            let b = rate_sample_bits(&gw, alloc.user(k), &kbar_r.diag);
            rd.push(a);
            rr.push(b);
            diff.push(a - b);
        }
        let td = rd.estimate().mean - c_d;
        let tr = rr.estimate().mean - c_r;
        if td > 0.0 || tr > 0.0 {
            var += diff.estimate().std_error.powi(2);
        }
        lb_diag += td.max(0.0);
        lb_rot += tr.max(0.0);
    }
    let se = var.sqrt();
    Ok(RotationTrial {
        diagonal: lb_diag,
        rotated: lb_rot,
        std_error: se,
        diagonal_wins: lb_diag >= lb_rot - 3.0 * se,
    })
}

/// Draws `trials` Haar rotations and reports how often the diagonal
/// configuration is at least as good as the rotated one, up to 3 SE.
pub fn theorem1_rotation_test(
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    alloc: &PowerAllocation,
    trials: usize,
    samples: u64,
    seeds: &SeedSpace,
) -> Result<RotationReport> {
    if trials == 0 {
        return Err(Error::config("need at least one rotation trial"));
    }
    let m = alloc.beams();
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let w = haar_unitary(m, &mut seeds.stream(Domain::Rotation, 0, t as u64));
        out.push(rotation_trial(omegas, omega_eve, alloc, &w, samples, seeds)?);
    }
    let wins = out.iter().filter(|t| t.diagonal_wins).count();
    let win_fraction = wins as f64 / trials as f64;
    Ok(RotationReport {
        trials: out,
        win_fraction,
        passes: win_fraction >= ROTATION_PASS_LEVEL,
    })
}

/// Permutation matrix sending beam `m` to `perm[m]`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    CMatrix::from_fn(n, n, |r, c| if perm[c] == r { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
}

/// Exact water-filling for one user without cross terms:
/// `lambda_m = [(d_m + mu)^{-1} - g_m^{-1}]^+` with `mu` set by the budget.
///
/// Returns the allocation and `mu`.
pub fn single_user_water_filling(gamma: &[f64], delta: &[f64], p: f64) -> Result<(Vec<f64>, f64)> {
    if gamma.len() != delta.len() {
        return Err(Error::dim("gamma and delta lengths differ"));
    }
    let level = |mu: f64| -> Vec<f64> {
        gamma
            .iter()
            .zip(delta)
            .map(|(&g, &d)| if g > 0.0 { (1.0 / (d + mu) - 1.0 / g).max(0.0) } else { 0.0 })
            .collect()
    };
    let total = |mu: f64| level(mu).iter().sum::<f64>();
    if delta.iter().all(|d| *d > 0.0) && total(0.0) <= p {
        return Ok((level(0.0), 0.0));
    }
    // total(mu) is continuous and decreasing; zero once mu >= max(g - d)
    let mut hi = gamma.iter().zip(delta).map(|(g, d)| g - d).fold(0.0, f64::max);
    if hi <= 0.0 {
        return Ok((vec![0.0; gamma.len()], 0.0));
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((level(hi), hi))
}

/// Euclidean projection onto `{x >= 0, sum x <= p}`.
pub fn project_capped_simplex(x: &mut [f64], p: f64) {
    let clamped: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if clamped <= p {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        return;
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - p) / (i + 1) as f64;
        if *v - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub iters: usize,
    /// Initial step; `None` picks `P / max|grad|` at the start point.
    pub step0: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            iters: 100_000,
            step0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], grad: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = f(&probe);
        // stay inside the orthant at the boundary
        let lo = (x[i] - h).max(0.0);
        probe[i] = lo;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (x[i] + h - lo);
    }
}

/// Projected gradient ascent of `f` over `{x >= 0, sum x <= p}`.
///
/// Gradients are central finite differences (shortened below at `x = 0`),
/// steps shrink like `1/sqrt(t)` and the base step halves whenever an
/// iterate is worse than its predecessor. Starts from the uniform point and returns the best iterate.
pub fn oracle_projected_gradient(f: impl Fn(&[f64]) -> f64, dim: usize, p: f64, config: &OracleConfig) -> Result<OracleResult> {
    if dim == 0 || !(p >= 0.0) {
        return Err(Error::config("oracle needs a positive dimension and p >= 0"));
    }
    let mut x = vec![p / dim as f64; dim];
    let mut fx = f(&x);
    let mut best = (x.clone(), fx);
    let mut grad = vec![0.0; dim];
    fd_gradient(&f, &x, &mut grad);
    let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let mut base = config.step0.unwrap_or(if gmax > 0.0 { p.max(1e-12) / gmax } else { 1.0 });
    let mut iterations = 0;
    for t in 0..config.iters {
        iterations = t + 1;
        if t > 0 {
            fd_gradient(&f, &x, &mut grad);
        }
        let step = base / (1.0 + t as f64 / 1000.0).sqrt();
        let mut next: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v + step * g).collect();
        project_capped_simplex(&mut next, p);
        let fn_ = f(&next);
        if !fn_.is_finite() || fn_ < fx {
            base *= 0.5;
            if base < 1e-300 {
                break;
            }
            if !fn_.is_finite() {
                continue;
            }
        }
        x = next;
        fx = fn_;
        if fx > best.1 {
            best = (x.clone(), fx);
        }
    }
    Ok(OracleResult {
        x: best.0,
        value: best.1,
        iterations,
    })
}

/// Oracle maximizer of a CCCP surrogate.
pub fn oracle_surrogate(problem: &crate::optimizer::SurrogateProblem<'_>, config: &OracleConfig) -> Result<(PowerAllocation, f64)> {
    let (k_users, m) = (problem.users(), problem.beams());
    let res = oracle_projected_gradient(
        |x| {
            let a = PowerAllocation::new(k_users, m, x.to_vec()).expect("shape fixed");
            crate::optimizer::surrogate_objective(&a, problem)
        },
        k_users * m,
        problem.p,
        config,
    )?;
    Ok((PowerAllocation::new(k_users, m, res.x)?, res.value))
}

/// Draws `x >= 0` from one of a few fixed families, for the ratio
/// inequality suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma1Family {
    /// `Exp(1)`.
    Exponential,
    /// `2 * Bernoulli(1/2)`.
    TwoPoint,
    /// `Uniform(0, 4)`.
    Uniform,
    /// `|CN(0,1)|^2 * 3`, a scaled chi-square with two degrees of freedom.
    ScaledChiSquare,
}

impl Lemma1Family {
    pub const ALL: [Lemma1Family; 4] = [
        Lemma1Family::Exponential,
        Lemma1Family::TwoPoint,
        Lemma1Family::Uniform,
        Lemma1Family::ScaledChiSquare,
    ];

    pub fn mean(self) -> f64 {
        match self {
            Lemma1Family::Exponential => 1.0,
            Lemma1Family::TwoPoint => 1.0,
            Lemma1Family::Uniform => 2.0,
            Lemma1Family::ScaledChiSquare => 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Lemma1Family::Exponential => -(1.0 - rng.random::<f64>()).ln(),
            Lemma1Family::TwoPoint => {
                if rng.random::<bool>() {
                    2.0
                } else {
                    0.0
                }
            }
            Lemma1Family::Uniform => 4.0 * rng.random::<f64>(),
            Lemma1Family::ScaledChiSquare => 3.0 * crate::rng::complex_gaussian(rng, 1.0).norm_sqr(),
        }
    }
}

/// The ratio-inequality check for `family` using its exact mean.
pub fn lemma1_family_check(family: Lemma1Family, a: f64, b: f64, samples: usize, seeds: &SeedSpace) -> Result<Lemma1Report> {
    let mut rng = seeds.stream(Domain::Lemma, family as usize, 0);
    lemma1_check(|r| family.sample(r), &mut rng, a, b, samples, Some(family.mean()))
}
