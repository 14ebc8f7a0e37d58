use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 100_000;

/// Uniform box grid on `H_m` in coordinates `(t, x_1..x_m, y_1..y_m)`.
///
/// Spatial axes are centred at 0 with spacing `h`; the `t` axis uses spacing
/// `h^2` so that the dilation `delta_2` maps grid lines to grid lines.
/// Extents are half-widths, so an axis with half-count `c` has `2c + 1` nodes.
/// Node indices are row-major with `t` slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub m: usize,
    pub t_extent: f64,
    pub xy_extent: f64,
    pub h: f64,
    pub t_steps: usize,
    pub spatial_steps: usize,
    pub node_count: usize,
}

/// Builds a grid, refusing anything above `cap` nodes.
pub fn build_grid(m: usize, t_extent: f64, xy_extent: f64, h: f64, cap: usize) -> Result<Grid> {
    if m == 0 {
        return Err(Error::domain("Heisenberg grid needs m >= 1"));
    }
    for (name, v) in [("t_extent", t_extent), ("xy_extent", xy_extent), ("h", h)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    let half_t = (t_extent / (h * h)).round() as usize;
    let half_xy = (xy_extent / h).round() as usize;
    let t_steps = 2 * half_t + 1;
    let spatial_steps = 2 * half_xy + 1;
    let size = (0..2 * m).try_fold(t_steps, |acc, _| acc.checked_mul(spatial_steps));
    match size {
        Some(node_count) if node_count <= cap => Ok(Grid {
            m,
            t_extent,
            xy_extent,
            h,
            t_steps,
            spatial_steps,
            node_count,
        }),
        other => Err(Error::Resource {
            what: format!("grid m={m} with {t_steps} t-steps and {spatial_steps} spatial steps"),
            size: other.unwrap_or(usize::MAX),
            cap,
        }),
    }
}

impl Grid {
    pub fn t_spacing(&self) -> f64 {
        self.h * self.h
    }

    /// Number of axes: `t` plus `2m` spatial ones.
    pub fn axes(&self) -> usize {
        2 * self.m + 1
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        if axis == 0 {
            self.t_steps
        } else {
            self.spatial_steps
        }
    }

    /// Index stride of one step along `axis`.
    pub fn axis_stride(&self, axis: usize) -> usize {
        ((axis + 1)..self.axes()).map(|a| self.axis_len(a)).product()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        let mut out = vec![0; self.axes()];
        for axis in (0..self.axes()).rev() {
            let len = self.axis_len(axis);
            out[axis] = rem % len;
            rem /= len;
        }
        out
    }

    pub fn node(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .enumerate()
            .fold(0, |acc, (axis, &i)| acc * self.axis_len(axis) + i)
    }

    /// Physical coordinate of integer position `i` on `axis`.
    pub fn axis_coordinate(&self, axis: usize, i: usize) -> f64 {
        let half = (self.axis_len(axis) / 2) as f64;
        let spacing = if axis == 0 { self.t_spacing() } else { self.h };
        (i as f64 - half) * spacing
    }

    /// `(t, x_1..x_m, y_1..y_m)` of a node.
    pub fn coordinates(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_coordinate(axis, i))
            .collect()
    }

    /// Samples a function of `(t, x_1..x_m, y_1..y_m)` on every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.node_count).map(|i| f(&self.coordinates(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nine_cubed() -> Grid {
        let h = 0.25;
        build_grid(1, 4.0 * h * h, 4.0 * h, h, DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn node_count_m1() {
        let g = nine_cubed();
        assert_eq!((g.t_steps, g.spatial_steps, g.node_count), (9, 9, 729));
        assert_eq!(g.t_spacing(), g.h * g.h);
    }

    #[test]
    fn index_round_trip() {
        let g = build_grid(2, 0.5, 0.5, 0.5, DEFAULT_NODE_CAP).unwrap();
        for node in 0..g.node_count {
            let mi = g.multi_index(node);
            assert_eq!(g.node(&mi), node);
            let coords = g.coordinates(node);
            for (axis, (&i, c)) in mi.iter().zip(&coords).enumerate() {
                let spacing = if axis == 0 { g.t_spacing() } else { g.h };
                let back = (c / spacing).round() as i64 + (g.axis_len(axis) / 2) as i64;
                assert_eq!(back as usize, i);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = build_grid(2, 1.0, 1.0, 0.1, DEFAULT_NODE_CAP).unwrap_err();
        match err {
            Error::Resource { size, cap, .. } => {
                assert_eq!(cap, DEFAULT_NODE_CAP);
                assert_eq!(size, 201 * 21usize.pow(4));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_grid(0, 1.0, 1.0, 0.5, 100).is_err());
        assert!(build_grid(1, -1.0, 1.0, 0.5, 100).is_err());
        assert!(build_grid(1, 1.0, 1.0, 0.0, 100).is_err());
    }
}
