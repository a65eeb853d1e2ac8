//! Row-major dense matrices and pivoted LU factorizations.
//!
//! Local patch problems are factored with full pivoting so that rank
//! deficiency is detected reliably; large coarse-level saddle systems use
//! partial pivoting.

use crate::error::{Error, Result};

/// Relative pivot threshold below which a factorization is declared singular.
pub const SINGULAR_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.data[r * self.ncols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.data[r * self.ncols + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        self.data[r * self.ncols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (top, bottom) = self.data.split_at_mut(hi * self.ncols);
        top[lo * self.ncols..(lo + 1) * self.ncols].swap_with_slice(&mut bottom[..self.ncols]);
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for r in 0..self.nrows {
            self.data.swap(r * self.ncols + a, r * self.ncols + b);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            let row = self.row(r);
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                s += a * b;
            }
            y[r] = s;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute difference against `other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// x^T (self) x for a square matrix.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let ax = self.matvec(x);
        ax.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }
}

/// LU factorization with full pivoting: P A Q = L U.
///
/// Factoring always succeeds; rank deficiency is recorded and surfaces as an
/// error on `solve`.
#[derive(Clone, Debug)]
pub struct FullPivLu {
    n: usize,
    lu: DenseMatrix,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    rank: usize,
    max_pivot: f64,
    min_pivot: f64,
}

impl FullPivLu {
    pub fn factor(a: &DenseMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut lu = a.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        let mut max_pivot = 0.0_f64;
        let mut min_pivot = f64::INFINITY;
        let mut rank = n;

        for k in 0..n {
            let mut best = (k, k, 0.0_f64);
            for i in k..n {
                let row = lu.row(i);
                for (j, &v) in row.iter().enumerate().skip(k) {
                    let av = v.abs();
                    if av > best.2 {
                        best = (i, j, av);
                    }
                }
            }
            let (pi, pj, pmax) = best;
            if k == 0 {
                max_pivot = pmax;
            }
            if pmax <= SINGULAR_REL_TOL * max_pivot || pmax == 0.0 {
                rank = k;
                min_pivot = min_pivot.min(pmax);
                break;
            }
            min_pivot = min_pivot.min(pmax);
            lu.swap_rows(k, pi);
            lu.swap_cols(k, pj);
            row_perm.swap(k, pi);
            col_perm.swap(k, pj);

            let piv = lu.at(k, k);
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for i in 0..n - k - 1 {
                let row = &mut lower[i * n..(i + 1) * n];
                let f = row[k] / piv;
                row[k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        row[j] -= f * pivot_row[j];
                    }
                }
            }
        }
        if n == 0 {
            min_pivot = 0.0;
        }
        Self {
            n,
            lu,
            row_perm,
            col_perm,
            rank,
            max_pivot,
            min_pivot,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_singular(&self) -> bool {
        self.rank < self.n
    }

    pub fn max_pivot(&self) -> f64 {
        self.max_pivot
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        if self.is_singular() {
            return Err(Error::SingularMatrix {
                pivot: self.min_pivot,
                threshold: SINGULAR_REL_TOL * self.max_pivot,
            });
        }
        let n = self.n;
        // Forward substitution on the permuted right-hand side (unit lower part).
        let mut x: Vec<f64> = (0..n).map(|i| b[self.row_perm[i]]).collect();
        for i in 1..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        // Undo the column permutation.
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[self.col_perm[i]] = x[i];
        }
        Ok(out)
    }
}

/// LU factorization with partial (row) pivoting: P A = L U.
#[derive(Clone, Debug)]
pub struct PartialPivLu {
    n: usize,
    lu: DenseMatrix,
    row_perm: Vec<usize>,
    scale: f64,
    min_pivot: f64,
    singular: bool,
}

impl PartialPivLu {
    pub fn factor(a: &DenseMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        let mut singular = n == 0;

        for k in 0..n {
            let mut pi = k;
            let mut pmax = lu.at(k, k).abs();
            for i in k + 1..n {
                let v = lu.at(i, k).abs();
                if v > pmax {
                    pmax = v;
                    pi = i;
                }
            }
            min_pivot = min_pivot.min(pmax);
            if pmax <= SINGULAR_REL_TOL * scale || pmax == 0.0 {
                singular = true;
                break;
            }
            lu.swap_rows(k, pi);
            row_perm.swap(k, pi);

            let piv = lu.at(k, k);
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for i in 0..n - k - 1 {
                let row = &mut lower[i * n..(i + 1) * n];
                let f = row[k] / piv;
                row[k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        row[j] -= f * pivot_row[j];
                    }
                }
            }
        }
        if n == 0 {
            min_pivot = 0.0;
        }
        Self {
            n,
            lu,
            row_perm,
            scale,
            min_pivot,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Smallest pivot magnitude encountered during elimination.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Largest absolute entry of the factored matrix (pivot scale reference).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        if self.singular {
            return Err(Error::SingularMatrix {
                pivot: self.min_pivot,
                threshold: SINGULAR_REL_TOL * self.scale,
            });
        }
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|i| b[self.row_perm[i]]).collect();
        for i in 1..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        Ok(x)
    }
}

/// Inverts a small square matrix via full-pivot LU.
pub fn invert_small(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.nrows();
    let lu = FullPivLu::factor(a);
    let mut inv = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = lu.solve(&e)?;
        e[c] = 0.0;
        for r in 0..n {
            inv.set(r, c, col[r]);
        }
    }
    Ok(inv)
}
