//! Small dense complex matrices.
//!
//! Everything the rate estimators factor is at most `N_r x N_r` (a handful of
//! receive antennas), so a row-major `Vec` with a hand-rolled Cholesky is all
//! that is needed.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
#[allow(unused_imports)] // float math without std
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::complex_gaussian;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("row-major data length does not match rows*cols"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim("inner dimensions differ in matrix product"));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * diag(d)`: scales column `c` by `d[c]`.
    pub fn scale_columns(&self, d: &[f64]) -> CMatrix {
        debug_assert_eq!(d.len(), self.cols);
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * d[c])
    }

    /// `diag(d) * self`: scales row `r` by `d[r]`.
    pub fn scale_rows(&self, d: &[f64]) -> CMatrix {
        debug_assert_eq!(d.len(), self.rows);
        CMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * d[r])
    }

    /// `I + self * self^H`, always Hermitian positive definite.
    pub fn gram_plus_identity(&self) -> CMatrix {
        let n = self.rows;
        let mut out = CMatrix::identity(n);
        for i in 0..n {
            let ri = self.row(i);
            for j in 0..=i {
                let rj = self.row(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in ri.iter().zip(rj) {
                    acc += a * b.conj();
                }
                out[(i, j)] += acc;
                if i != j {
                    out[(j, i)] += acc.conj();
                }
            }
        }
        out
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Natural-log determinant of a Hermitian positive definite matrix via
/// Cholesky. Only the lower triangle is read.
pub fn hermitian_logdet(a: &CMatrix) -> Result<f64> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::dim("log-det of a non-square matrix"));
    }
    let mut l = CMatrix::zeros(n, n);
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        logdet += 2.0 * djj.ln();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(logdet)
}

/// Unitary DFT matrix, entry `(a, b) = exp(-2 pi i a b / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |a, b| {
        // reduce the phase index first so large n keeps full precision
        let idx = ((a as u128 * b as u128) % n as u128) as f64;
        let theta = -2.0 * PI * idx / n as f64;
        Complex64::new(theta.cos() * scale, theta.sin() * scale)
    })
}

/// Haar-distributed random unitary from QR of a complex Gaussian matrix, with
/// the phases of `R`'s diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|_| (0..n).map(|_| complex_gaussian(rng, 1.0)).collect())
        .collect();
    // modified Gram-Schmidt, twice for numerical orthogonality
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qi = &done[i];
                let v = &mut rest[0];
                let proj: Complex64 = qi.iter().zip(v.iter()).map(|(q, x)| q.conj() * x).sum();
                for (x, q) in v.iter_mut().zip(qi) {
                    *x -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    CMatrix::from_fn(n, n, |r, c| cols[c][r])
}
