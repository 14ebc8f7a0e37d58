use std::collections::BTreeMap;

use super::grid::Grid;
use super::sparse::CsrMatrix;
use super::{Backend, SymmetricOperator};

/// Central-difference discretizations of the horizontal fields
/// `X_k = d/dx_k + 2 y_k d/dt` and `X_{m+k} = d/dy_k - 2 x_k d/dt`.
///
/// Neighbours outside the box are dropped (Dirichlet truncation).
pub fn build_vector_fields(grid: &Grid) -> Vec<CsrMatrix> {
    let m = grid.m;
    (0..2 * m)
        .map(|k| {
            let (deriv_axis, drift_axis, drift_sign) = if k < m {
                (1 + k, 1 + m + k, 2.0)
            } else {
                (1 + k, 1 + (k - m), -2.0)
            };
            field_matrix(grid, deriv_axis, drift_axis, drift_sign)
        })
        .collect()
}

fn field_matrix(grid: &Grid, deriv_axis: usize, drift_axis: usize, drift_sign: f64) -> CsrMatrix {
    let n = grid.node_count;
    let ds = 1.0 / (2.0 * grid.h);
    let dt = 1.0 / (2.0 * grid.t_spacing());
    let stride_s = grid.axis_stride(deriv_axis);
    let stride_t = grid.axis_stride(0);
    let mut entries = BTreeMap::new();
    for node in 0..n {
        let mi = grid.multi_index(node);
        let i_s = mi[deriv_axis];
        if i_s + 1 < grid.spatial_steps {
            *entries.entry((node, node + stride_s)).or_insert(0.0) += ds;
        }
        if i_s > 0 {
            *entries.entry((node, node - stride_s)).or_insert(0.0) -= ds;
        }
        let coeff = drift_sign * grid.axis_coordinate(drift_axis, mi[drift_axis]);
        if coeff != 0.0 {
            let i_t = mi[0];
            if i_t + 1 < grid.t_steps {
                *entries.entry((node, node + stride_t)).or_insert(0.0) += coeff * dt;
            }
            if i_t > 0 {
                *entries.entry((node, node - stride_t)).or_insert(0.0) -= coeff * dt;
            }
        }
    }
    CsrMatrix::from_map(n, n, &entries)
}

/// Gram assembly `D = sum_k X_k^T X_k`.
///
/// Only the upper triangle is accumulated; the lower one is its mirror, so
/// the result is bitwise symmetric and positive semidefinite.
pub fn build_sublaplacian(fields: &[CsrMatrix]) -> SymmetricOperator {
    let n = fields.first().map_or(0, CsrMatrix::ncols);
    let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for x in fields {
        for r in 0..x.nrows() {
            let row: Vec<(usize, f64)> = x.row(r).collect();
            for (a, &(ca, va)) in row.iter().enumerate() {
                for &(cb, vb) in &row[a..] {
                    *upper.entry((ca, cb)).or_insert(0.0) += va * vb;
                }
            }
        }
    }
    SymmetricOperator::from_upper(n, &upper, Backend::Heisenberg { m: fields.len() / 2 })
}

pub fn heisenberg_sublaplacian(grid: &Grid) -> SymmetricOperator {
    build_sublaplacian(&build_vector_fields(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_circle_laplacian, build_grid, DEFAULT_NODE_CAP};
    use nalgebra::SymmetricEigen;

    fn grid9() -> Grid {
        let h = 0.25;
        build_grid(1, 4.0 * h * h, 4.0 * h, h, DEFAULT_NODE_CAP).unwrap()
    }

    fn interior(grid: &Grid, node: usize, margin: usize) -> bool {
        grid.multi_index(node)
            .iter()
            .enumerate()
            .all(|(axis, &i)| i >= margin && i + margin < grid.axis_len(axis))
    }

    #[test]
    fn fields_kill_constants_in_the_interior() {
        let g = grid9();
        let ones = vec![1.0; g.node_count];
        for x in build_vector_fields(&g) {
            let out = x.apply(&ones).unwrap();
            for node in (0..g.node_count).filter(|&i| interior(&g, i, 1)) {
                assert!(out[node].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn x1_is_pure_dx_where_y_vanishes() {
        let g = grid9();
        let fields = build_vector_fields(&g);
        let dx = 1.0 / (2.0 * g.h);
        for node in 0..g.node_count {
            let mi = g.multi_index(node);
            if g.axis_coordinate(2, mi[2]) != 0.0 {
                continue;
            }
            let row: Vec<(usize, f64)> = fields[0].row(node).collect();
            let mut expected = Vec::new();
            if mi[1] > 0 {
                expected.push((node - g.axis_stride(1), -dx));
            }
            if mi[1] + 1 < g.spatial_steps {
                expected.push((node + g.axis_stride(1), dx));
            }
            assert_eq!(row, expected);
        }
    }

    #[test]
    fn commutator_on_t_is_minus_four() {
        // [X_1, X_2] = -4 d/dt, exact on the polynomial t for central differences.
        let g = grid9();
        let fields = build_vector_fields(&g);
        let f = g.sample(|c| c[0]);
        let x1x2 = fields[0].apply(&fields[1].apply(&f).unwrap()).unwrap();
        let x2x1 = fields[1].apply(&fields[0].apply(&f).unwrap()).unwrap();
        let mut checked = 0;
        for node in (0..g.node_count).filter(|&i| interior(&g, i, 2)) {
            assert!((x1x2[node] - x2x1[node] + 4.0).abs() < 1e-9);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn sublaplacian_is_symmetric_psd_gram() {
        let g = grid9();
        let fields = build_vector_fields(&g);
        let d = build_sublaplacian(&fields);
        assert_eq!(d.max_asymmetry(), 0.0);
        assert_eq!(d.backend(), Backend::Heisenberg { m: 1 });
        let eig = SymmetricEigen::new(d.to_dense());
        let lmax = eig.eigenvalues.max();
        assert!(eig.eigenvalues.min() >= -1e-10 * lmax);

        let f: Vec<f64> = (0..g.node_count).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let gram: f64 = fields
            .iter()
            .map(|x| x.apply(&f).unwrap().iter().map(|v| v * v).sum::<f64>())
            .sum();
        let q = d.quadratic_form(&f).unwrap();
        assert!((q - gram).abs() <= 1e-12 * gram);
    }

    #[test]
    fn x1_part_on_y0_slice_is_two_interleaved_circle_forms() {
        // f lives on the y = 0, t = 0 slice and vanishes within two steps of the
        // x-boundary; ||X_1 f||^2 is then the central-difference energy, which
        // splits into even and odd sublattices with spacing 2h.
        let h = 0.25;
        let g = build_grid(1, 2.0 * h * h, 10.0 * h, h, DEFAULT_NODE_CAP).unwrap();
        let fields = build_vector_fields(&g);
        let nx = g.spatial_steps;
        let profile: Vec<f64> = (0..nx)
            .map(|i| if (2..nx - 2).contains(&i) { ((i * i) as f64 * 0.37).sin() } else { 0.0 })
            .collect();
        let mut f = vec![0.0; g.node_count];
        for (i, &p) in profile.iter().enumerate() {
            f[g.node(&[g.t_steps / 2, i, nx / 2])] = p;
        }
        let x1f = fields[0].apply(&f).unwrap();
        let form: f64 = x1f.iter().map(|v| v * v).sum();

        let mut oracle = 0.0;
        for parity in 0..2 {
            let sub: Vec<f64> = profile.iter().skip(parity).step_by(2).copied().collect();
            let mut padded = sub.clone();
            padded.push(0.0);
            let circle = build_circle_laplacian(padded.len(), 2.0 * h).unwrap();
            oracle += circle.quadratic_form(&padded).unwrap();
        }
        assert!((form - oracle).abs() <= 1e-12 * oracle.max(1.0), "{form} vs {oracle}");
    }
}
