//! Dense and matrix-free kernels shared by the spectral and spline code.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm with max-abs scaling, safe for entries near under/overflow.
pub fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Seeded standard normal vector.
pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Householder QR with column pivoting by remaining column norm.
///
/// Used for least-squares problems whose rows carry weights spanning many
/// orders of magnitude; callers sort rows by decreasing weight first.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    qr: DMatrix<f64>,
    betas: Vec<f64>,
    /// `perm[k]` is the original column sitting at position `k`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut betas = vec![0.0; steps];
        let mut col = vec![0.0; m];
        for k in 0..steps {
            let (best, _) = (k..n)
                .map(|j| {
                    for (i, c) in col[..m - k].iter_mut().enumerate() {
                        *c = a[(k + i, j)];
                    }
                    (j, norm(&col[..m - k]))
                })
                .fold((k, -1.0), |acc, (j, nj)| if nj > acc.1 { (j, nj) } else { acc });
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }
            let x: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
            let xnorm = norm(&x);
            if xnorm == 0.0 {
                continue;
            }
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            let pivot = x[0] - alpha;
            // v = x / pivot with v[0] = 1
            let v: Vec<f64> = std::iter::once(1.0).chain(x[1..].iter().map(|xi| xi / pivot)).collect();
            let beta = 2.0 / dot(&v, &v);
            for c in (k + 1)..n {
                let s = beta * (0..v.len()).map(|i| v[i] * a[(k + i, c)]).sum::<f64>();
                if s != 0.0 {
                    for (i, vi) in v.iter().enumerate() {
                        a[(k + i, c)] -= s * vi;
                    }
                }
            }
            a[(k, k)] = alpha;
            for (i, vi) in v.iter().enumerate().skip(1) {
                a[(k + i, k)] = *vi;
            }
            betas[k] = beta;
        }
        PivotedQr { qr: a, betas, perm }
    }

    pub fn nrows(&self) -> usize {
        self.qr.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.qr.ncols()
    }

    /// Diagonal of `R` in pivoted order.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.betas.len()).map(|k| self.qr[(k, k)]).collect()
    }

    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.qr.nrows();
        for (k, &beta) in self.betas.iter().enumerate() {
            if beta == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in (k + 1)..m {
                s += self.qr[(i, k)] * b[i];
            }
            s *= beta;
            b[k] -= s;
            for i in (k + 1)..m {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Least-squares solution of `A x ~ b`; needs full column rank and
    /// `nrows >= ncols`.
    pub fn solve_least_squares(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.qr.shape();
        if b.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: b.len(),
            });
        }
        if m < n {
            return Err(Error::domain(format!(
                "least squares needs at least as many rows ({m}) as unknowns ({n})"
            )));
        }
        let mut y = b.to_vec();
        self.apply_qt(&mut y);
        let mut z = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = y[k];
            for c in (k + 1)..n {
                s -= self.qr[(k, c)] * z[c];
            }
            let d = self.qr[(k, k)];
            if d == 0.0 {
                return Err(Error::Solver {
                    what: "triangular solve (rank-deficient system)".into(),
                    residual: f64::INFINITY,
                });
            }
            z[k] = s / d;
        }
        Ok(self.unpermute(&z))
    }

    fn unpermute(&self, z: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; z.len()];
        for (k, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[k];
        }
        x
    }

    /// `(A^T A)^{-1} g` in the original column order.
    pub fn solve_normal(&self, g: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = self.perm.iter().map(|&orig| g[orig]).collect();
        self.unpermute(&self.apply_inverse_normal(&x))
    }

    /// `(R^T R)^{-1} x` by two triangular solves.
    fn apply_inverse_normal(&self, x: &[f64]) -> Vec<f64> {
        let n = self.qr.ncols();
        let mut z = x.to_vec();
        for k in 0..n {
            let mut s = z[k];
            for i in 0..k {
                s -= self.qr[(i, k)] * z[i];
            }
            z[k] = s / self.qr[(k, k)];
        }
        for k in (0..n).rev() {
            let mut s = z[k];
            for c in (k + 1)..n {
                s -= self.qr[(k, c)] * z[c];
            }
            z[k] = s / self.qr[(k, k)];
        }
        z
    }

    /// Smallest singular value of `A`, a unit right singular vector for it
    /// and the relative eigen-residual of that pair.
    ///
    /// Works on `R` alone through `(R^T R)^{-1}`, so on row-graded matrices
    /// the result keeps relative accuracy far below `eps * sigma_max`, where
    /// a plain SVD only resolves singular values down to roundoff.
    pub fn min_singular_value(&self, seed: u64) -> Result<(f64, Vec<f64>, f64)> {
        let (m, n) = self.qr.shape();
        if m < n {
            return Ok((0.0, vec![0.0; n], 0.0));
        }
        if let Some(k) = (0..n).find(|&k| self.qr[(k, k)] == 0.0) {
            // R e_k lies in the span of the previous columns
            let mut z = vec![0.0; n];
            z[k] = 1.0;
            for i in (0..k).rev() {
                let mut s = -self.qr[(i, k)];
                for c in (i + 1)..k {
                    s -= self.qr[(i, c)] * z[c];
                }
                z[i] = s / self.qr[(i, i)];
            }
            normalize(&mut z);
            return Ok((0.0, self.unpermute(&z), 0.0));
        }
        // a few power steps bring the top eigenvalue to order one
        let mut rng = seeded_rng(seed);
        let mut x = gaussian_vector(n, &mut rng);
        let mut scale = 1.0;
        for _ in 0..4 {
            normalize(&mut x);
            x = self.apply_inverse_normal(&x);
            scale = norm(&x);
        }
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Solver {
                what: "inverse iteration on R".into(),
                residual: f64::INFINITY,
            });
        }
        let pairs = lowest_eigenpairs(
            |v: &[f64]| self.apply_inverse_normal(v).iter().map(|y| -y / scale).collect(),
            n,
            1,
            1e-12,
            seed,
        )?;
        let mu = -pairs.values[0];
        let sigma = (1.0 / (mu * scale)).sqrt();
        Ok((sigma, self.unpermute(&pairs.vectors[0]), pairs.residuals[0] / mu))
    }
}

/// Extreme singular values of a dense matrix and a right singular vector
/// for the smallest one.
#[derive(Debug, Clone)]
pub struct SingularSummary {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Count of singular values above `rel_threshold * sigma_max`.
    pub rank: usize,
    pub min_right_vector: Vec<f64>,
}

/// Wide matrices are padded with zero rows, so `sigma_min` is 0 and the
/// returned vector spans part of the null space whenever `rows < cols`.
pub fn singular_summary(a: &DMatrix<f64>, rel_threshold: f64) -> Result<SingularSummary> {
    let (m, n) = a.shape();
    if n == 0 {
        return Err(Error::domain("singular values of a matrix with no columns"));
    }
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = nalgebra::SVD::try_new(padded, false, true, f64::EPSILON, 0).ok_or(Error::Solver {
        what: "singular value decomposition".into(),
        residual: f64::INFINITY,
    })?;
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (imin, sigma_min) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rel_threshold * sigma_max)
        .count()
        .min(m);
    Ok(SingularSummary {
        sigma_min: if m < n { 0.0 } else { sigma_min },
        sigma_max,
        rank,
        min_right_vector: v_t.row(imin).iter().copied().collect(),
    })
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
///
/// A direction with `p^T A p <= 0` means the operator is singular on the
/// Krylov space; it is returned as a [`Error::NonUnique`] witness.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= f64::EPSILON * dot(&p, &p) * 1e-8 {
            let mut w = p.clone();
            normalize(&mut w);
            return Err(Error::NonUnique { witness: w });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it + 1,
                relative_residual: rel,
            });
        }
        let gamma = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + gamma * *pi;
        }
    }
    Err(Error::Solver {
        what: "conjugate gradient".into(),
        residual: rr.sqrt() / bnorm,
    })
}

/// Eigenpairs found by [`lowest_eigenpairs`].
#[derive(Debug, Clone)]
pub struct RitzPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            axpy(-c, q, w);
        }
    }
}

/// Lowest `r` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalization and explicit deflation: each restart converges the
/// smallest Ritz pair of the operator restricted to the complement of the
/// pairs already found, so repeated eigenvalues are picked up one by one.
pub fn lowest_eigenpairs(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    r: usize,
    tol: f64,
    seed: u64,
) -> Result<RitzPairs> {
    if r == 0 || r > n {
        return Err(Error::domain(format!("cannot extract {r} eigenpairs from dimension {n}")));
    }
    let mut rng = seeded_rng(seed);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut values = Vec::with_capacity(r);
    let min_dim = 24;
    while found.len() < r {
        let space = n - found.len();
        let mut q = gaussian_vector(n, &mut rng);
        orthogonalize(&mut q, &found);
        normalize(&mut q);
        let mut basis: Vec<Vec<f64>> = vec![q];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut best_residual = f64::INFINITY;
        let mut accepted: Option<(f64, Vec<f64>)> = None;
        for j in 0..space {
            let qj = &basis[j];
            let mut w = apply(qj);
            let alpha = dot(qj, &w);
            axpy(-alpha, qj, &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            orthogonalize(&mut w, &found);
            orthogonalize(&mut w, &basis);
            alphas.push(alpha);
            let beta = norm(&w);
            let exhausted = j + 1 == space || beta <= tol * 1e-3;
            if j + 1 >= min_dim.min(space) || exhausted {
                let k = alphas.len();
                let mut t = DMatrix::zeros(k, k);
                for i in 0..k {
                    t[(i, i)] = alphas[i];
                    if i + 1 < k {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let eig = SymmetricEigen::new(t);
                let (imin, theta) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty tridiagonal");
                let y = eig.eigenvectors.column(imin);
                let residual = (beta * y[k - 1]).abs();
                best_residual = best_residual.min(residual);
                if residual <= tol || exhausted {
                    let mut x = vec![0.0; n];
                    for (i, qi) in basis.iter().enumerate() {
                        axpy(y[i], qi, &mut x);
                    }
                    orthogonalize(&mut x, &found);
                    normalize(&mut x);
                    accepted = Some((theta, x));
                    break;
                }
            }
            betas.push(beta);
            w.iter_mut().for_each(|v| *v /= beta);
            basis.push(w);
        }
        match accepted {
            Some((theta, x)) => {
                values.push(theta);
                found.push(x);
            }
            None => {
                return Err(Error::Solver {
                    what: "Lanczos".into(),
                    residual: best_residual,
                })
            }
        }
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = RitzPairs {
        values: Vec::with_capacity(r),
        vectors: Vec::with_capacity(r),
        residuals: Vec::with_capacity(r),
    };
    for i in order {
        let ax = apply(&found[i]);
        let res = norm(&sub(&ax, &found[i].iter().map(|v| v * values[i]).collect::<Vec<_>>()));
        out.values.push(values[i]);
        out.residuals.push(res);
        out.vectors.push(found[i].clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoted_qr_solves_square_and_overdetermined() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x_true[j]).sum()).collect();
        let x = PivotedQr::new(a).solve_least_squares(&b).unwrap();
        for (xi, ti) in x.iter().zip(x_true) {
            assert!((xi - ti).abs() < 1e-13);
        }

        // Overdetermined: compare against normal equations.
        let a = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0 + (i == j) as u8 as f64);
        let b: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let x = PivotedQr::new(a.clone()).solve_least_squares(&b).unwrap();
        let ata = a.transpose() * &a;
        let atb = a.transpose() * nalgebra::DVector::from_column_slice(&b);
        let xn = ata.lu().solve(&atb).unwrap();
        for (xi, ni) in x.iter().zip(xn.iter()) {
            assert!((xi - ni).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoted_qr_handles_stiff_row_weights() {
        // Rows scaled by 1, 1e-30, 1e-60: the weighted solution is fixed by
        // the heavy rows.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1e-30, -1e-30, 1e-60, 2e-60]);
        let b = [2.0, 0.0, 1e-60];
        let x = PivotedQr::new(a).solve_least_squares(&b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14, "{x:?}");
    }

    #[test]
    fn min_singular_value_of_graded_rows_keeps_relative_accuracy() {
        // A = D Q with Q orthogonal has exactly the singular values of D.
        let mut rng = seeded_rng(4);
        let g = DMatrix::from_column_slice(5, 5, &gaussian_vector(25, &mut rng));
        let q = g.qr().q();
        let d = [1.0, 1e-4, 1e-8, 1e-12, 1e-16];
        let a = DMatrix::from_fn(5, 5, |i, j| d[i] * q[(i, j)]);
        let (sigma, v, resid) = PivotedQr::new(a).min_singular_value(1).unwrap();
        assert!((sigma / 1e-16 - 1.0).abs() < 1e-8, "{sigma:e}");
        assert!(resid < 1e-10);
        // right singular vector is the last row of Q up to sign
        let c: f64 = (0..5).map(|j| v[j] * q[(4, j)]).sum();
        assert!((c.abs() - 1.0).abs() < 1e-8);

        let rank_deficient = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.5, 1.0]);
        let (sigma, v, _) = PivotedQr::new(rank_deficient).min_singular_value(1).unwrap();
        assert!(sigma < 1e-14);
        assert!((v[0] + 2.0 * v[1]).abs() < 1e-12);
    }

    #[test]
    fn singular_summary_of_wide_matrix_has_null_vector() {
        let a = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let s = singular_summary(&a, 1e-8).unwrap();
        assert_eq!((s.sigma_min, s.rank), (0.0, 1));
        assert!((s.sigma_max - 5.0).abs() < 1e-12);
        let v = &s.min_right_vector;
        assert!((3.0 * v[0] + 4.0 * v[1]).abs() < 1e-12);
        assert!((norm(v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_matches_direct_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let out = conjugate_gradient(
            |x| (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x[j]).sum()).collect(),
            &b,
            1e-12,
            50,
        )
        .unwrap();
        let direct = a.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for (x, d) in out.x.iter().zip(direct.iter()) {
            assert!((x - d).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_reports_singular_direction() {
        // diag(1, 0): rhs with a kernel component breaks down.
        let err = conjugate_gradient(|x| vec![x[0], 0.0], &[0.0, 1.0], 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::NonUnique { .. }));
    }

    #[test]
    fn lanczos_finds_repeated_eigenvalues() {
        // diag(5, 1, 1, 3, 0, 7) in a rotated basis is still diagonal here;
        // duplicates must both be found.
        let d = [5.0, 1.0, 1.0, 3.0, 0.0, 7.0];
        let pairs = lowest_eigenpairs(|x| x.iter().zip(d).map(|(a, b)| a * b).collect(), 6, 4, 1e-12, 7).unwrap();
        let expected = [0.0, 1.0, 1.0, 3.0];
        for (v, e) in pairs.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-10, "{:?}", pairs.values);
        }
        assert!(pairs.residuals.iter().all(|&r| r < 1e-9));
    }
}
