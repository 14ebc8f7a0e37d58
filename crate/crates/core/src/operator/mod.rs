//! Discrete operators, Heisenberg group arithmetic, grids and sampling lattices.
//!
//! Every operator is stored as a [`SymmetricOperator`]: a CSR matrix whose
//! upper triangle is accumulated once and mirrored, so `entry(i, j)` and
//! `entry(j, i)` are the same bits.

mod fields;
mod grid;
mod group;
mod lattice;
pub mod market;
mod sparse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use fields::{build_sublaplacian, build_vector_fields, heisenberg_sublaplacian};
pub use grid::{build_grid, Grid, DEFAULT_NODE_CAP};
pub use group::{dilate, heisenberg_compose, homogeneous_norm, GroupPoint};
pub use lattice::{lattice_sample_set, level_stride, SampleSet, SamplingGeometry};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Which discretization an operator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Backend {
    Heisenberg { m: usize },
    Circle,
    Graph,
}

impl Backend {
    /// Scaling exponent of the natural dilations: `2m + 2` on `H_m`, 1 on the
    /// circle, undefined for an abstract graph.
    pub fn homogeneous_dimension(&self) -> Option<usize> {
        match self {
            Backend::Heisenberg { m } => Some(2 * m + 2),
            Backend::Circle => Some(1),
            Backend::Graph => None,
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Heisenberg { m } => write!(f, "heisenberg m={m}"),
            Backend::Circle => f.write_str("circle"),
            Backend::Graph => f.write_str("graph"),
        }
    }
}

/// Sparse symmetric positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    matrix: CsrMatrix,
    backend: Backend,
}

impl SymmetricOperator {
    /// Builds from upper-triangle entries `(i, j)` with `i <= j`; the lower
    /// triangle is a bitwise mirror.
    pub fn from_upper(n: usize, upper: &BTreeMap<(usize, usize), f64>, backend: Backend) -> Self {
        let mut full = BTreeMap::new();
        for (&(i, j), &v) in upper {
            debug_assert!(i <= j);
            full.insert((i, j), v);
            full.insert((j, i), v);
        }
        SymmetricOperator {
            matrix: CsrMatrix::from_map(n, n, &full),
            backend,
        }
    }

    /// Builds from an arbitrary entry list, rejecting anything that is not
    /// exactly symmetric. Duplicate coordinates are summed.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        backend: Backend,
    ) -> Result<Self> {
        let mut full: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::Dimension {
                    expected: n,
                    got: i.max(j) + 1,
                });
            }
            if !v.is_finite() {
                return Err(Error::domain(format!("non-finite entry at ({i},{j})")));
            }
            *full.entry((i, j)).or_insert(0.0) += v;
        }
        for (&(i, j), &v) in &full {
            if i < j {
                let lower = full.get(&(j, i)).copied().unwrap_or(0.0);
                if lower.to_bits() != v.to_bits() {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        upper: v,
                        lower,
                    });
                }
            } else if i > j && !full.contains_key(&(j, i)) {
                return Err(Error::Asymmetric {
                    i: j,
                    j: i,
                    upper: 0.0,
                    lower: v,
                });
            }
        }
        Ok(SymmetricOperator {
            matrix: CsrMatrix::from_map(n, n, &full),
            backend,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.matrix.apply(f)
    }

    pub fn quadratic_form(&self, f: &[f64]) -> Result<f64> {
        let df = self.apply(f)?;
        Ok(df.iter().zip(f).map(|(a, b)| a * b).sum())
    }

    /// Largest `|entry(i,j) - entry(j,i)|`; zero for anything built here.
    pub fn max_asymmetry(&self) -> f64 {
        self.matrix
            .triplets()
            .map(|(i, j, v)| (v - self.entry(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Gershgorin upper bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        self.matrix.to_dense()
    }

    /// Stable content hash: dimension, backend and every stored entry's bits.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim() as u64).to_le_bytes());
        hasher.update(self.backend.to_string().as_bytes());
        for (i, j, v) in self.matrix.triplets() {
            hasher.update((i as u64).to_le_bytes());
            hasher.update((j as u64).to_le_bytes());
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..16])
    }
}

/// `op^k f` by repeated sparse application; `k = 0` returns `f`.
pub fn apply_power(op: &SymmetricOperator, k: usize, f: &[f64]) -> Result<Vec<f64>> {
    apply_power_scaled(op, k, f, 1.0)
}

/// `(op / scale)^k f`. Dividing by a spectral-radius bound keeps high powers
/// from overflowing.
pub fn apply_power_scaled(
    op: &SymmetricOperator,
    k: usize,
    f: &[f64],
    scale: f64,
) -> Result<Vec<f64>> {
    if f.len() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            got: f.len(),
        });
    }
    let mut out = f.to_vec();
    for _ in 0..k {
        out = op.apply(&out)?;
        if scale != 1.0 {
            out.iter_mut().for_each(|v| *v /= scale);
        }
    }
    Ok(out)
}

/// Periodic second difference on `n` equispaced points, scaled by `1/h^2`.
pub fn build_circle_laplacian(n: usize, h: f64) -> Result<SymmetricOperator> {
    if n < 3 {
        return Err(Error::domain(format!("circle needs n >= 3, got {n}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("spacing must be positive, got {h}")));
    }
    let inv = 1.0 / (h * h);
    let mut upper = BTreeMap::new();
    for i in 0..n {
        upper.insert((i, i), 2.0 * inv);
        let next = (i + 1) % n;
        let key = (i.min(next), i.max(next));
        upper.insert(key, -inv);
    }
    Ok(SymmetricOperator::from_upper(n, &upper, Backend::Circle))
}

/// Weighted graph Laplacian `degree - adjacency` on nodes `0..n`.
/// Repeated edges accumulate their weights.
pub fn build_graph_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> Result<SymmetricOperator> {
    let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, w) in edges {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::domain(format!(
                "edge ({i},{j}) has nonpositive weight {w}"
            )));
        }
        if i == j {
            return Err(Error::domain(format!("self-loop at node {i}")));
        }
        if i >= n || j >= n {
            return Err(Error::Dimension {
                expected: n,
                got: i.max(j) + 1,
            });
        }
        *upper.entry((i, i)).or_insert(0.0) += w;
        *upper.entry((j, j)).or_insert(0.0) += w;
        *upper.entry((i.min(j), i.max(j))).or_insert(0.0) -= w;
    }
    Ok(SymmetricOperator::from_upper(n, &upper, Backend::Graph))
}
