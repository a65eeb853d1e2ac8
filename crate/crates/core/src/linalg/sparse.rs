//! Compressed sparse row matrices with deterministic assembly.
//!
//! Triplet accumulation sorts duplicates by (row, col, value) before summing,
//! so assembled matrices are bit-identical under any permutation of the
//! element loop.

use super::dense::DenseMatrix;

#[derive(Clone, Debug, Default)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.nrows && c < self.ncols);
        if v != 0.0 {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let nnz = self.vals.len();
        let mut order: Vec<usize> = (0..nnz).collect();
        order.sort_unstable_by(|&a, &b| {
            (self.rows[a], self.cols[a])
                .cmp(&(self.rows[b], self.cols[b]))
                .then(self.vals[a].total_cmp(&self.vals[b]))
        });

        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let key = (self.rows[k], self.cols[k]);
            if last == Some(key) {
                *vals.last_mut().unwrap() += self.vals[k];
            } else {
                indices.push(self.cols[k]);
                vals.push(self.vals[k]);
                indptr[self.rows[k] + 1] += 1;
                last = Some(key);
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            vals,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[range.clone()], &self.vals[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals.iter()) {
                s += v * x[*c];
            }
            y[r] = s;
        }
    }

    /// y += scale * A x.
    pub fn matvec_axpy(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals.iter()) {
                s += v * x[*c];
            }
            y[r] += scale * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut indptr = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            indptr[c + 1] += 1;
        }
        for c in 0..self.ncols {
            indptr[c + 1] += indptr[c];
        }
        let mut indices = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        let mut next = indptr.clone();
        for r in 0..self.nrows {
            let (cols, rvals) = self.row(r);
            for (c, v) in cols.iter().zip(rvals.iter()) {
                let slot = next[*c];
                indices[slot] = r;
                vals[slot] = *v;
                next[*c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            vals,
        }
    }

    /// Sparse product self * rhs with sorted column output.
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, rhs.nrows);
        let n_out = rhs.ncols;
        let mut acc = vec![0.0_f64; n_out];
        let mut stamp = vec![usize::MAX; n_out];
        let mut touched: Vec<usize> = Vec::new();

        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut vals = Vec::new();

        for r in 0..self.nrows {
            touched.clear();
            let (cols, rvals) = self.row(r);
            for (k, v) in cols.iter().zip(rvals.iter()) {
                let (kcols, kvals) = rhs.row(*k);
                for (c, w) in kcols.iter().zip(kvals.iter()) {
                    if stamp[*c] != r {
                        stamp[*c] = r;
                        acc[*c] = 0.0;
                        touched.push(*c);
                    }
                    acc[*c] += v * w;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    indices.push(c);
                    vals.push(acc[c]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: n_out,
            indptr,
            indices,
            vals,
        }
    }

    /// Entry-wise difference self - other as a sparse matrix.
    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut vals = Vec::new();
        for r in 0..self.nrows {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                let (c, v) = if j >= bc.len() || (i < ac.len() && ac[i] < bc[j]) {
                    let out = (ac[i], av[i]);
                    i += 1;
                    out
                } else if i >= ac.len() || bc[j] < ac[i] {
                    let out = (bc[j], -bv[j]);
                    j += 1;
                    out
                } else {
                    let out = (ac[i], av[i] - bv[j]);
                    i += 1;
                    j += 1;
                    out
                };
                if v != 0.0 {
                    indices.push(c);
                    vals.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            vals,
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sets all stored entries of masked rows to zero (structure unchanged).
    pub fn zero_rows(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.nrows);
        for r in 0..self.nrows {
            if mask[r] {
                for v in &mut self.vals[self.indptr[r]..self.indptr[r + 1]] {
                    *v = 0.0;
                }
            }
        }
    }

    /// Sets all stored entries of masked columns to zero (structure unchanged).
    pub fn zero_cols(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.ncols);
        for (c, v) in self.indices.iter().zip(self.vals.iter_mut()) {
            if mask[*c] {
                *v = 0.0;
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                d.add(r, *c, *v);
            }
        }
        d
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_to_csr_sums_duplicates() {
        let mut coo = CooMatrix::new(2, 3);
        coo.push(0, 1, 1.0);
        coo.push(1, 2, 2.0);
        coo.push(0, 1, 0.5);
        coo.push(0, 0, -1.0);
        let csr = coo.to_csr();
        assert_eq!(csr.nnz(), 3);
        assert_eq!(csr.get(0, 1), 1.5);
        assert_eq!(csr.get(0, 0), -1.0);
        assert_eq!(csr.get(1, 2), 2.0);
    }

    #[test]
    fn permuted_assembly_is_bit_identical() {
        // Same triplets in two different orders must produce identical values.
        let trip = [
            (0usize, 0usize, 0.1),
            (0, 0, 0.3),
            (0, 0, -0.2),
            (1, 1, 1.0e-17),
            (1, 1, 1.0),
            (1, 1, -1.0),
        ];
        let mut a = CooMatrix::new(2, 2);
        for &(r, c, v) in &trip {
            a.push(r, c, v);
        }
        let mut b = CooMatrix::new(2, 2);
        for &(r, c, v) in trip.iter().rev() {
            b.push(r, c, v);
        }
        let (ca, cb) = (a.to_csr(), b.to_csr());
        assert_eq!(ca.get(0, 0).to_bits(), cb.get(0, 0).to_bits());
        assert_eq!(ca.get(1, 1).to_bits(), cb.get(1, 1).to_bits());
    }

    #[test]
    fn matmul_matches_dense() {
        let mut a = CooMatrix::new(3, 4);
        let mut b = CooMatrix::new(4, 2);
        a.push(0, 0, 1.0);
        a.push(0, 3, 2.0);
        a.push(1, 1, -1.0);
        a.push(2, 2, 0.5);
        b.push(0, 1, 3.0);
        b.push(3, 0, 1.0);
        b.push(1, 0, 2.0);
        b.push(2, 1, -4.0);
        let prod = a.to_csr().matmul(&b.to_csr());
        assert_eq!(prod.get(0, 0), 2.0);
        assert_eq!(prod.get(0, 1), 3.0);
        assert_eq!(prod.get(1, 0), -2.0);
        assert_eq!(prod.get(2, 1), -2.0);
    }

    #[test]
    fn transpose_roundtrip() {
        let mut a = CooMatrix::new(3, 5);
        a.push(0, 4, 1.0);
        a.push(2, 1, -2.0);
        a.push(1, 1, 0.25);
        let csr = a.to_csr();
        let tt = csr.transpose().transpose();
        assert_eq!(csr.sub(&tt).frobenius(), 0.0);
    }
}
