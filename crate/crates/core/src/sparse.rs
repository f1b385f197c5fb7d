//! Minimal complex compressed-sparse-column matrices. Operators are
//! assembled once at startup and applied many times; structure is
//! immutable after construction.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed,
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            match merged.last_mut() {
                Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != Complex64::ZERO);

        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &merged {
            col_ptr[c + 1] += 1;
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx = merged.iter().map(|&(r, _, _)| r).collect();
        let values = merged.iter().map(|&(_, _, v)| v).collect();
        CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.fill(Complex64::ZERO);
        self.apply_add(Complex64::ONE, x, y);
    }

    /// y += a * A x
    pub fn apply_add(&self, a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for col in 0..self.ncols {
            let xj = x[col] * a;
            if xj == Complex64::ZERO {
                continue;
            }
            for i in self.col_ptr[col]..self.col_ptr[col + 1] {
                y[self.row_idx[i]] += self.values[i] * xj;
            }
        }
    }

    /// C = self * other (matrix product).
    pub fn matmul(&self, other: &CscMatrix) -> CscMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut triplets = Vec::new();
        let mut dense = vec![Complex64::ZERO; self.nrows];
        let mut touched: Vec<usize> = Vec::new();
        for col in 0..other.ncols {
            for i in other.col_ptr[col]..other.col_ptr[col + 1] {
                let r = other.row_idx[i];
                let v = other.values[i];
                for j in self.col_ptr[r]..self.col_ptr[r + 1] {
                    let row = self.row_idx[j];
                    if dense[row] == Complex64::ZERO {
                        touched.push(row);
                    }
                    dense[row] += self.values[j] * v;
                }
            }
            for &row in &touched {
                if dense[row] != Complex64::ZERO {
                    triplets.push((row, col, dense[row]));
                }
                dense[row] = Complex64::ZERO;
            }
            touched.clear();
        }
        CscMatrix::from_triplets(self.nrows, other.ncols, triplets)
    }

    pub fn scaled(&self, a: Complex64) -> CscMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= a;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for col in 0..self.ncols {
            for i in self.col_ptr[col]..self.col_ptr[col + 1] {
                m[(self.row_idx[i], col)] += self.values[i];
            }
        }
        m
    }

    /// Entries as (row, col, value) triplets in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.ncols).flat_map(move |col| {
            (self.col_ptr[col]..self.col_ptr[col + 1])
                .map(move |i| (self.row_idx[i], col, self.values[i]))
        })
    }

    /// True when no entry sits in the given row (structural zero row).
    pub fn row_is_empty(&self, row: usize) -> bool {
        !self.row_idx.contains(&row)
    }
}
