use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with column indices sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from a keyed map; entries are emitted in (row, col) order.
    pub fn from_map(nrows: usize, ncols: usize, entries: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (&(i, j), &v) in entries {
            debug_assert!(i < nrows && j < ncols);
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension {
                expected: self.ncols,
                got: x.len(),
            });
        }
        Ok((0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `self x` with `x` and the result as unevaluated pairs `hi + lo`, each
    /// row summed with error-free transformations. Stored entries are taken
    /// as exact, so the result carries roughly twice the working precision.
    pub fn apply_compensated(&self, x: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension {
                expected: self.ncols,
                got: x.len(),
            });
        }
        Ok((0..self.nrows)
            .map(|i| {
                let (mut s, mut c) = (0.0f64, 0.0f64);
                for (j, v) in self.row(i) {
                    let (hi, lo) = x[j];
                    let p = v * hi;
                    let pe = v.mul_add(hi, -p) + v * lo;
                    let t = s + p;
                    let bb = t - s;
                    c += (s - (t - bb)) + (p - bb) + pe;
                    s = t;
                }
                let hi = s + c;
                (hi, c - (hi - s))
            })
            .collect())
    }

    /// `self^T x` without forming the transpose.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::Dimension {
                expected: self.nrows,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                out[j] += v * xi;
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_apply_keeps_cancelled_digits() {
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), 1.0);
        entries.insert((0, 1), -1.0);
        entries.insert((0, 2), 1.0);
        let m = CsrMatrix::from_map(1, 3, &entries);
        // 1 + 2^-60 - 1 vanishes in plain arithmetic
        let x = [(1.0, 0.0), (1.0, 0.0), (2f64.powi(-60), 0.0)];
        assert_eq!(m.apply(&[1.0, 1.0, 2f64.powi(-60)]).unwrap()[0], 2f64.powi(-60));
        let y = m.apply_compensated(&[(1.0, 2f64.powi(-70)), (1.0, 0.0), (0.0, 0.0)]).unwrap();
        assert_eq!(y[0], (2f64.powi(-70), 0.0));
        let y = m.apply_compensated(&x).unwrap();
        assert_eq!(y[0].0 + y[0].1, 2f64.powi(-60));
    }
}
