//! System dimensions, coupling matrices and beam-domain channel sampling.
//!
//! A terminal's beam-domain channel `G` (receive antennas x beams) has
//! independent, zero-mean, circularly-symmetric complex Gaussian entries whose
//! variances form the coupling matrix `Omega`. The column sums of `Omega` are
//! the beam gains, i.e. the diagonal of the transmit correlation in the beam
//! domain.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float math without std
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{dft_matrix, CMatrix};
use crate::rng::{complex_gaussian, Domain, SeedSpace};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDims {
    /// BS antennas, equivalently beams.
    pub m: usize,
    /// Legitimate users.
    pub k: usize,
    /// Antennas per legitimate user.
    pub n_r: usize,
    /// Eavesdropper antennas.
    pub n_e: usize,
    /// Total transmit power, linear, unit noise.
    pub p: f64,
}

impl SystemDims {
    pub fn new(m: usize, k: usize, n_r: usize, n_e: usize, p: f64) -> Result<Self> {
        let dims = Self { m, k, n_r, n_e, p };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n_r == 0 || self.n_e == 0 {
            return Err(Error::dim("M, K, N_r and N_e must all be at least 1"));
        }
        if !(self.p >= 0.0) || !self.p.is_finite() {
            return Err(Error::config("power budget P must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn with_power(mut self, p: f64) -> Self {
        self.p = p;
        self
    }
}

/// Nonnegative variance profile of a beam-domain channel, `rows x cols`,
/// stored row-major. Serialized as `{rows, cols, entries}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling", into = "RawCoupling")]
pub struct CouplingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCoupling {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawCoupling> for CouplingMatrix {
    type Error = Error;
    fn try_from(raw: RawCoupling) -> Result<Self> {
        CouplingMatrix::new(raw.rows, raw.cols, raw.entries)
    }
}

impl From<CouplingMatrix> for RawCoupling {
    fn from(c: CouplingMatrix) -> Self {
        RawCoupling {
            rows: c.rows,
            cols: c.cols,
            entries: c.entries,
        }
    }
}

impl CouplingMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("coupling matrix needs at least one row and column"));
        }
        if entries.len() != rows * cols {
            return Err(Error::dim(format!(
                "coupling matrix {rows}x{cols} given {} entries",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(format!(
                "coupling entry {bad} is {} (must be finite and >= 0)",
                entries[bad]
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged coupling rows"));
        }
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[n * self.cols + m]
    }

    /// Row `n`, i.e. the diagonal of the per-antenna correlation `diag(omega_n)`.
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.entries[n * self.cols..(n + 1) * self.cols]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `a * self + b * other`; both scalars must be nonnegative.
    pub fn combine(&self, a: f64, other: &CouplingMatrix, b: f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim("cannot combine coupling matrices of different shape"));
        }
        Self::new(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for n in 0..self.rows {
            for m in 0..self.cols {
                entries.push(f(n, m, self.get(n, m)));
            }
        }
        Self::new(self.rows, self.cols, entries)
    }

    pub fn check_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::dim(format!(
                "{what}: expected {rows}x{cols} coupling matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// Diagonal of the beam-domain transmit correlation: column sums of `Omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamGainVector {
    pub gains: Vec<f64>,
}

pub fn beam_gains(omega: &CouplingMatrix) -> BeamGainVector {
    let mut gains = vec![0.0; omega.cols()];
    for n in 0..omega.rows() {
        for (g, w) in gains.iter_mut().zip(omega.row(n)) {
            *g += w;
        }
    }
    BeamGainVector { gains }
}

/// One realization of a beam-domain channel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamChannelSample {
    pub entries: CMatrix,
}

/// `G_{nm} ~ CN(0, Omega_{nm})`, independent across entries.
pub fn sample_beam_channel<R: Rng + ?Sized>(omega: &CouplingMatrix, rng: &mut R) -> BeamChannelSample {
    let entries = CMatrix::from_fn(omega.rows(), omega.cols(), |n, m| {
        complex_gaussian(rng, omega.get(n, m))
    });
    BeamChannelSample { entries }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryBeamBasis {
    pub matrix: CMatrix,
}

/// DFT beam basis of a uniform linear array with `m` elements.
pub fn dft_basis(m: usize) -> Result<UnitaryBeamBasis> {
    if m == 0 {
        return Err(Error::dim("DFT basis needs M >= 1"));
    }
    Ok(UnitaryBeamBasis {
        matrix: dft_matrix(m),
    })
}

/// Parameters of the synthetic coupling families. Unused fields are ignored by
/// the families that do not need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    /// exponential-cluster: angular spread in beams (default `M / 16`, at least 1).
    pub width: Option<f64>,
    /// exponential-cluster: clusters per terminal (default 1).
    pub clusters: Option<usize>,
    /// exponential-cluster: relative floor added to every beam (default 1e-3).
    pub floor: Option<f64>,
    /// sparse-beams: explicit beam support shared by every terminal.
    pub support: Option<Vec<usize>>,
    /// sparse-beams: size of the random per-terminal support (default `max(1, M / 8)`).
    pub support_size: Option<usize>,
}

/// Synthetic coupling profile: `kind` is one of `uniform`,
/// `exponential-cluster`, `sparse-beams`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub kind: String,
    #[serde(default)]
    pub params: ProfileParams,
    #[serde(default)]
    pub seed: u64,
}

impl ProfileSpec {
    pub fn new(kind: &str, params: ProfileParams, seed: u64) -> Self {
        Self {
            kind: kind.to_string(),
            params,
            seed,
        }
    }

    pub fn uniform() -> Self {
        Self::new("uniform", ProfileParams::default(), 0)
    }
}

/// Per-user coupling matrices plus the eavesdropper's, from a synthetic family.
///
/// Each terminal is normalized so its entries sum to `rows * M`.
pub fn synth_coupling(dims: &SystemDims, profile: &ProfileSpec) -> Result<(Vec<CouplingMatrix>, CouplingMatrix)> {
    dims.validate()?;
    let seeds = SeedSpace::new(profile.seed);
    let p = &profile.params;
    let m = dims.m;

    let build = |terminal: usize, rows: usize| -> Result<CouplingMatrix> {
        let mut rng = seeds.stream(Domain::Synthesis, terminal, 0);
        let raw: Vec<f64> = match profile.kind.as_str() {
            "uniform" => vec![1.0; rows * m],
            "exponential-cluster" => {
                let width = p.width.unwrap_or((m as f64 / 16.0).max(1.0));
                let clusters = p.clusters.unwrap_or(1);
                let floor = p.floor.unwrap_or(1e-3);
                if !(width > 0.0) || clusters == 0 || !(floor >= 0.0) {
                    return Err(Error::config(
                        "exponential-cluster needs width > 0, clusters >= 1, floor >= 0",
                    ));
                }
                let centers: Vec<f64> = (0..clusters).map(|_| rng.random::<f64>() * m as f64).collect();
                let profile: Vec<f64> = (0..m)
                    .map(|b| {
                        let s: f64 = centers
                            .iter()
                            .map(|&c| {
                                let d = (b as f64 - c).abs();
                                let d = d.min(m as f64 - d);
                                (-d / width).exp()
                            })
                            .sum();
                        s + floor
                    })
                    .collect();
                let mut out = Vec::with_capacity(rows * m);
                for _ in 0..rows {
                    let antenna = 0.5 + rng.random::<f64>();
                    for b in 0..m {
                        let jitter = 0.75 + 0.5 * rng.random::<f64>();
                        out.push(antenna * profile[b] * jitter);
                    }
                }
                out
            }
            "sparse-beams" => {
                let support: Vec<usize> = match &p.support {
                    Some(s) => {
                        if s.len() > m || s.iter().any(|&b| b >= m) {
                            return Err(Error::config("sparse-beams support must be a subset of 0..M"));
                        }
                        s.clone()
                    }
                    None => {
                        let size = p.support_size.unwrap_or((m / 8).max(1));
                        if size > m {
                            return Err(Error::config("sparse-beams support_size exceeds M"));
                        }
                        // partial Fisher-Yates
                        let mut idx: Vec<usize> = (0..m).collect();
                        for i in 0..size {
                            let j = i + (rng.random::<u64>() % (m - i) as u64) as usize;
                            idx.swap(i, j);
                        }
                        idx.truncate(size);
                        idx
                    }
                };
                if support.is_empty() {
                    return Err(Error::config("sparse-beams support is empty"));
                }
                let mut out = vec![0.0; rows * m];
                for n in 0..rows {
                    for &b in &support {
                        out[n * m + b] = 0.5 + rng.random::<f64>();
                    }
                }
                out
            }
            other => return Err(Error::config(format!("unknown coupling profile kind '{other}'"))),
        };
        let total: f64 = raw.iter().sum();
        let scale = (rows * m) as f64 / total;
        CouplingMatrix::new(rows, m, raw.into_iter().map(|v| v * scale).collect())
    };

    let users = (0..dims.k).map(|k| build(k, dims.n_r)).collect::<Result<Vec<_>>>()?;
    let eve = build(dims.k, dims.n_e)?;
    Ok((users, eve))
}
