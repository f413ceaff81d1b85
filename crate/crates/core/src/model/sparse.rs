//! Minimal compressed-sparse-row storage for real operators acting on dense
//! complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; explicit zeros are kept out.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let keep: Vec<bool> = values.iter().map(|&v| v != 0.0).collect();
        let mut ci = Vec::with_capacity(values.len());
        let mut vs = Vec::with_capacity(values.len());
        for i in 0..values.len() {
            if keep[i] {
                row_ptr[rows[i] + 1] += 1;
                ci.push(col_idx[i]);
                vs.push(values[i]);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, col_idx: ci, values: vs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `out += scale · A x` for a complex vector.
    pub fn mul_vec_acc(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                acc += x[c] * v;
            }
            *o += scale * acc;
        }
    }

    /// `out += scale · (A ρ)` with `ρ` and `out` column-major `dim × dim`.
    pub fn left_mul_acc(&self, rho: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        let n = self.dim;
        for k in 0..n {
            let col = &rho[k * n..(k + 1) * n];
            self.mul_vec_acc(col, scale, &mut out[k * n..(k + 1) * n]);
        }
    }

    /// `out += scale · (ρ A)` for symmetric `A`, column-major storage.
    pub fn right_mul_symmetric_acc(&self, rho: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        let n = self.dim;
        for k in 0..n {
            // column k of ρA = Σ_j ρ[:, j] A[j, k], and A[j, k] = A[k, j]
            let (head, _) = out.split_at_mut((k + 1) * n);
            let dst = &mut head[k * n..];
            for (j, v) in self.row(k) {
                let s = scale * v;
                let src = &rho[j * n..(j + 1) * n];
                for (d, x) in dst.iter_mut().zip(src) {
                    *d += s * x;
                }
            }
        }
    }
}
