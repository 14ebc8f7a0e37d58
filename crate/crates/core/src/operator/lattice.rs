use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Ordered set of sample nodes together with the lattice that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub level: i32,
    pub indices: Vec<usize>,
    /// Step between samples along each spatial axis, in grid steps.
    pub spatial_stride: Option<usize>,
    /// Step along the central axis; `spatial_stride^2` on Heisenberg grids.
    pub t_stride: Option<usize>,
    pub anchor: Option<usize>,
}

impl SampleSet {
    /// Arbitrary node list (graphs, hand-picked sets). Sorted and deduplicated.
    pub fn explicit(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut idx: Vec<usize> = indices.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad + 1,
            });
        }
        Ok(SampleSet {
            level: 0,
            indices: idx,
            spatial_stride: None,
            t_stride: None,
            anchor: None,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.indices.binary_search(&node).is_ok()
    }

    /// Indices of `0..n` not in the set, ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n.saturating_sub(self.len()));
        let mut it = self.indices.iter().peekable();
        for i in 0..n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        out
    }

    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| f[i]).collect()
    }

    pub fn is_subset_of(&self, other: &SampleSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }
}

/// `2^j * base_stride`, which must be a whole number of grid steps.
pub fn level_stride(base_stride: usize, level: i32) -> Result<usize> {
    if base_stride == 0 {
        return Err(Error::domain("base stride must be at least one grid step"));
    }
    if level >= 0 {
        1usize
            .checked_shl(level as u32)
            .and_then(|p| p.checked_mul(base_stride))
            .ok_or_else(|| Error::domain(format!("stride 2^{level} * {base_stride} overflows")))
    } else {
        let div = 1usize
            .checked_shl(level.unsigned_abs())
            .ok_or_else(|| Error::domain(format!("level {level} out of range")))?;
        if base_stride % div != 0 {
            return Err(Error::domain(format!(
                "stride 2^{level} * {base_stride} is not a whole number of grid steps"
            )));
        }
        Ok(base_stride / div)
    }
}

/// Geometry on which dyadic sampling lattices are defined.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingGeometry {
    Heisenberg(Grid),
    Circle { n: usize },
}

impl SamplingGeometry {
    pub fn node_count(&self) -> usize {
        match self {
            SamplingGeometry::Heisenberg(g) => g.node_count,
            SamplingGeometry::Circle { n } => *n,
        }
    }

    pub fn lattice(&self, level: i32, base_stride: usize, anchor: usize) -> Result<SampleSet> {
        lattice_sample_set(self, level, base_stride, anchor)
    }
}

/// Dyadic lattice through `anchor` at level `j`.
///
/// On a Heisenberg grid the spatial stride is `s = 2^j s0` and the central
/// stride `s^2`, mirroring `delta_{2^j}`. On the circle the lattice is an
/// arithmetic progression with stride `s`.
pub fn lattice_sample_set(
    geometry: &SamplingGeometry,
    level: i32,
    base_stride: usize,
    anchor: usize,
) -> Result<SampleSet> {
    let stride = level_stride(base_stride, level)?;
    let n = geometry.node_count();
    if anchor >= n {
        return Err(Error::Dimension {
            expected: n,
            got: anchor + 1,
        });
    }
    match geometry {
        SamplingGeometry::Circle { n } => {
            let indices = (0..*n).filter(|i| i % stride == anchor % stride).collect();
            Ok(SampleSet {
                level,
                indices,
                spatial_stride: Some(stride),
                t_stride: None,
                anchor: Some(anchor),
            })
        }
        SamplingGeometry::Heisenberg(grid) => {
            let t_stride = stride
                .checked_mul(stride)
                .ok_or_else(|| Error::domain("central stride overflows"))?;
            let a = grid.multi_index(anchor);
            let indices = (0..grid.node_count)
                .filter(|&node| {
                    grid.multi_index(node).iter().zip(&a).enumerate().all(|(axis, (&i, &ai))| {
                        let s = if axis == 0 { t_stride } else { stride };
                        i.abs_diff(ai) % s == 0
                    })
                })
                .collect();
            Ok(SampleSet {
                level,
                indices,
                spatial_stride: Some(stride),
                t_stride: Some(t_stride),
                anchor: Some(anchor),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_grid, DEFAULT_NODE_CAP};

    fn grid9() -> Grid {
        let h = 0.25;
        build_grid(1, 4.0 * h * h, 4.0 * h, h, DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn unit_stride_is_everything() {
        let g = SamplingGeometry::Heisenberg(grid9());
        let s = g.lattice(0, 1, 0).unwrap();
        assert_eq!(s.len(), 729);
        let c = SamplingGeometry::Circle { n: 8 }.lattice(0, 1, 3).unwrap();
        assert_eq!(c.indices, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn circle_progression() {
        let c = SamplingGeometry::Circle { n: 8 };
        assert_eq!(c.lattice(1, 1, 0).unwrap().indices, vec![0, 2, 4, 6]);
        assert_eq!(c.lattice(1, 1, 5).unwrap().indices, vec![1, 3, 5, 7]);
        assert_eq!(c.lattice(2, 1, 1).unwrap().indices, vec![1, 5]);
    }

    #[test]
    fn heisenberg_anisotropy() {
        let grid = grid9();
        let center = grid.node(&[4, 4, 4]);
        let s = SamplingGeometry::Heisenberg(grid.clone()).lattice(1, 1, center).unwrap();
        assert_eq!((s.spatial_stride, s.t_stride), (Some(2), Some(4)));
        // t in {0,4,8}, x and y in {0,2,4,6,8}
        assert_eq!(s.len(), 3 * 5 * 5);
        for &node in &s.indices {
            let mi = grid.multi_index(node);
            assert_eq!(mi[0] % 4, 0);
            assert_eq!(mi[1] % 2, 0);
            assert_eq!(mi[2] % 2, 0);
        }
    }

    #[test]
    fn lattices_are_nested() {
        let grid = grid9();
        let geo = SamplingGeometry::Heisenberg(grid.clone());
        let anchor = grid.node(&[4, 4, 4]);
        for j in 1..3 {
            let coarse = geo.lattice(j, 1, anchor).unwrap();
            let fine = geo.lattice(j - 1, 1, anchor).unwrap();
            assert!(coarse.is_subset_of(&fine));
        }
        let circle = SamplingGeometry::Circle { n: 64 };
        for j in 0..4 {
            let coarse = circle.lattice(j, 2, 6).unwrap();
            let fine = circle.lattice(j - 1, 2, 6).unwrap();
            assert!(coarse.is_subset_of(&fine), "level {j}");
        }
    }

    #[test]
    fn fractional_strides_are_rejected() {
        assert!(level_stride(3, -1).is_err());
        assert_eq!(level_stride(4, -2).unwrap(), 1);
        assert_eq!(level_stride(3, 2).unwrap(), 12);
        assert!(level_stride(0, 0).is_err());
    }

    #[test]
    fn complement_and_restrict() {
        let s = SampleSet::explicit(6, [4, 1, 4]).unwrap();
        assert_eq!(s.indices, vec![1, 4]);
        assert_eq!(s.complement(6), vec![0, 2, 3, 5]);
        assert_eq!(s.restrict(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]), vec![1.0, 4.0]);
        assert!(SampleSet::explicit(3, [3]).is_err());
    }
}
