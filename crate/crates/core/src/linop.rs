//! Linear operator plumbing: a matrix-free operator trait, a compressed
//! sparse matrix with cached transpose, and power iteration for `‖K‖²`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A real linear map `K: R^cols -> R^rows` together with its adjoint.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = K x`, overwriting `y`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `x = Kᵀ y`, overwriting `x`.
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]);
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse matrix stored both by rows (CSR) and by columns (CSC), so that
/// forward and adjoint products are each a deterministic gather that can be
/// split across threads without changing summation order.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_idx_cols: Vec<u32>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_idx_rows: Vec<u32>,
    col_vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row entry lists. Column indices within a row must be
    /// strictly increasing.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut row_idx_cols = Vec::with_capacity(nnz);
        let mut row_vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev: Option<u32> = None;
            for (c, v) in row {
                if c as usize >= cols {
                    return Err(Error::shape(format!(
                        "row {i} has column {c} outside 0..{cols}"
                    )));
                }
                if prev.is_some_and(|p| p >= c) {
                    return Err(Error::shape(format!("row {i} has unsorted columns")));
                }
                prev = Some(c);
                row_idx_cols.push(c);
                row_vals.push(v);
            }
            row_ptr.push(row_idx_cols.len());
        }

        let mut counts = vec![0usize; cols + 1];
        for &c in &row_idx_cols {
            counts[c as usize + 1] += 1;
        }
        for j in 0..cols {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut fill = counts;
        let mut col_idx_rows = vec![0u32; nnz];
        let mut col_vals = vec![0.0; nnz];
        for i in 0..n_rows {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let c = row_idx_cols[k] as usize;
                let slot = fill[c];
                col_idx_rows[slot] = i as u32;
                col_vals[slot] = row_vals[k];
                fill[c] += 1;
            }
        }

        Ok(SparseMatrix {
            rows: n_rows,
            cols,
            row_ptr,
            row_idx_cols,
            row_vals,
            col_ptr,
            col_idx_rows,
            col_vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| vec![(i as u32, 1.0)]).collect();
        Self::from_rows(n, rows).expect("identity is well formed")
    }

    /// Builds from a dense row-major matrix, dropping exact zeros.
    pub fn from_dense(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(format!(
                "dense {rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        let entries = (0..rows)
            .map(|i| {
                (0..cols)
                    .filter_map(|j| {
                        let v = values[i * cols + j];
                        (v != 0.0).then_some((j as u32, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_rows(cols, entries)
    }

    pub fn nnz(&self) -> usize {
        self.row_vals.len()
    }

    /// Returns `diag(s) · self`.
    pub fn scale_rows(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.rows {
            return Err(Error::shape(format!(
                "row scaling of length {} for {} rows",
                s.len(),
                self.rows
            )));
        }
        let rows = (0..self.rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| (c, v * s[i])).collect()
            })
            .collect();
        Self::from_rows(self.cols, rows)
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_idx_cols[r.clone()], &self.row_vals[r])
    }

    /// `Kᵀ 1`, the column sums.
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.col_vals[self.col_ptr[j]..self.col_ptr[j + 1]].iter().sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row_vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Dense row-major copy (testing and small problems only).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[i * self.cols + c as usize] = v;
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.row_vals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

const PAR_CHUNK: usize = 256;

impl LinearOperator for SparseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(PAR_CHUNK)
            .enumerate()
            .for_each(|(chunk, ys)| {
                for (off, yi) in ys.iter_mut().enumerate() {
                    let i = chunk * PAR_CHUNK + off;
                    let r = self.row_ptr[i]..self.row_ptr[i + 1];
                    *yi = self.row_idx_cols[r.clone()]
                        .iter()
                        .zip(&self.row_vals[r])
                        .map(|(&c, &v)| v * x[c as usize])
                        .sum();
                }
            });
    }

    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.par_chunks_mut(PAR_CHUNK)
            .enumerate()
            .for_each(|(chunk, xs)| {
                for (off, xj) in xs.iter_mut().enumerate() {
                    let j = chunk * PAR_CHUNK + off;
                    let r = self.col_ptr[j]..self.col_ptr[j + 1];
                    *xj = self.col_idx_rows[r.clone()]
                        .iter()
                        .zip(&self.col_vals[r])
                        .map(|(&i, &v)| v * y[i as usize])
                        .sum();
                }
            });
    }
}

/// Settings for [`power_iteration`].
#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            tolerance: 1e-6,
            max_iterations: 1000,
        }
    }
}

/// Estimates `‖K‖² = λ_max(KᵀK)` by power iteration on `KᵀK`.
///
/// The start vector is a fixed pseudo-random sequence so the estimate is
/// reproducible. Stops once the Rayleigh quotient changes by at most
/// `tolerance` relative to its value.
pub fn power_iteration<K: LinearOperator + ?Sized>(op: &K, settings: PowerIteration) -> Result<f64> {
    let n = op.cols();
    if n == 0 {
        return Ok(0.0);
    }
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut kv = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..settings.max_iterations {
        op.apply(&v, &mut kv);
        op.apply_adjoint(&kv, &mut w);
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
        if (next - estimate).abs() <= settings.tolerance * next.abs() {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::PowerIteration {
        iterations: settings.max_iterations,
        estimate,
    })
}
