//! Small dense matrices: products, cyclic Jacobi, and an M-matrix solver.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, b: &Mat) -> Mat {
        debug_assert_eq!(self.cols, b.rows);
        let mut c = Mat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..b.cols {
                    c.data[i * b.cols + j] += a * b.data[k * b.cols + j];
                }
            }
        }
        c
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// A^k by repeated squaring.
    pub fn pow(&self, mut k: u64) -> Mat {
        let mut result = Mat::identity(self.rows);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and eigenvectors as matrix columns.
pub fn jacobi_eigen(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let n = a.rows;
    let mut a = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off == 0.0 || off <= 1e-34 * diag {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NoConvergence("jacobi sweeps exhausted"))
}

/// Solve (D − W) X = B for a nonsingular M-matrix given in triplet form:
/// `w` holds the nonnegative off-diagonal magnitudes (diagonal ignored),
/// `deficit[i]` = D_ii − Σ_j W_ij ≥ 0. Elimination never subtracts, so
/// nearly singular systems keep full relative accuracy.
pub fn mmatrix_solve(w: &Mat, deficit: &[f64], b: &Mat) -> Result<Mat> {
    let n = w.rows;
    let mut off = w.clone();
    for i in 0..n {
        off[(i, i)] = 0.0;
    }
    let mut s = deficit.to_vec();
    let mut rhs = b.clone();
    let mut piv = vec![0.0; n];
    for k in 0..n {
        let mut d = s[k];
        for j in k + 1..n {
            d += off[(k, j)];
        }
        if !(d > 0.0) {
            return Err(Error::Singular);
        }
        piv[k] = d;
        for i in k + 1..n {
            let lik = off[(i, k)];
            if lik == 0.0 {
                continue;
            }
            let f = lik / d;
            for j in k + 1..n {
                off[(i, j)] += f * off[(k, j)];
            }
            s[i] += f * s[k];
            for c in 0..rhs.cols {
                let add = f * rhs[(k, c)];
                rhs[(i, c)] += add;
            }
        }
    }
    let mut x = Mat::zeros(n, rhs.cols);
    for k in (0..n).rev() {
        for c in 0..rhs.cols {
            let mut acc = rhs[(k, c)];
            for j in k + 1..n {
                acc += off[(k, j)] * x[(j, c)];
            }
            x[(k, c)] = acc / piv[k];
        }
    }
    Ok(x)
}
