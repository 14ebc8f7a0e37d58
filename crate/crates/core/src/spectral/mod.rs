//! Eigendecompositions and the band-limited calculus built on them.
//!
//! Powers of the operator are evaluated in the eigenbasis, where `D^k f` is a
//! coefficientwise multiplication and cannot overflow on the way.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, gaussian_vector, seeded_rng};
use crate::operator::SymmetricOperator;

pub const DEFAULT_DENSE_CAP: usize = 5000;
pub const DENSE_CAP_ENV: &str = "PWSPLINE_DENSE_CAP";

/// Eigenvalues within this fraction of `lambda_max` count as zero, and band
/// edges are widened by the same amount so ties land inside the band.
pub const SPECTRAL_TIE: f64 = 1e-10;

/// Default tolerance for "exact" band membership.
pub const DEFAULT_ENERGY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecomposeMode {
    Full,
    /// The `r` smallest eigenpairs.
    Lowest(usize),
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub dense_cap: usize,
    /// Residual tolerance relative to `lambda_max`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        let dense_cap = std::env::var(DENSE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_DENSE_CAP);
        DecomposeOptions {
            dense_cap,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    vectors: DMatrix<f64>,
    residuals: Vec<f64>,
    lambda_max: f64,
    complete: bool,
    fingerprint: String,
}

pub fn decompose(
    op: &SymmetricOperator,
    mode: DecomposeMode,
    opts: &DecomposeOptions,
) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::domain("cannot decompose an empty operator"));
    }
    let decomp = match mode {
        DecomposeMode::Full => {
            if n > opts.dense_cap {
                return Err(Error::Resource {
                    what: "dense eigendecomposition".into(),
                    size: n,
                    cap: opts.dense_cap,
                });
            }
            dense(op)?
        }
        DecomposeMode::Lowest(r) => {
            if r == 0 || r >= n {
                return Err(Error::domain(format!(
                    "lowest-r mode needs 0 < r < n, got r = {r}, n = {n}"
                )));
            }
            iterative(op, r, opts)?
        }
    };
    let bound = opts.tol * decomp.lambda_max.max(f64::MIN_POSITIVE);
    let worst = decomp.residual();
    if worst > bound {
        return Err(Error::Solver {
            what: "eigendecomposition".into(),
            residual: worst,
        });
    }
    Ok(decomp)
}

fn residuals(op: &SymmetricOperator, values: &[f64], vectors: &DMatrix<f64>) -> Result<Vec<f64>> {
    (0..values.len())
        .map(|i| {
            let v = vectors.column(i);
            let dv = op.apply(v.as_slice())?;
            let r: Vec<f64> = dv.iter().zip(v.iter()).map(|(a, b)| a - values[i] * b).collect();
            Ok(linalg::norm(&r))
        })
        .collect()
}

/// Flip each vector so its largest-magnitude entry is positive.
fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let (_, pivot) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, &v)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
}

fn dense(op: &SymmetricOperator) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let eig = SymmetricEigen::try_new(op.to_dense(), f64::EPSILON, 0).ok_or(Error::Solver {
        what: "dense symmetric eigensolver".into(),
        residual: f64::INFINITY,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    fix_signs(&mut vectors);
    let residuals = residuals(op, &eigenvalues, &vectors)?;
    let lambda_max = eigenvalues[n - 1].max(0.0);
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        residuals,
        lambda_max,
        complete: true,
        fingerprint: op.fingerprint(),
    })
}

fn iterative(op: &SymmetricOperator, r: usize, opts: &DecomposeOptions) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let apply = |x: &[f64]| op.apply(x).expect("dimension checked");
    // Top of the spectrum from the negated operator.
    let top = linalg::lowest_eigenpairs(
        |x: &[f64]| apply(x).into_iter().map(|v| -v).collect(),
        n,
        1,
        opts.tol * 1e-2 * op.gershgorin_bound(),
        opts.seed ^ 0x5eed,
    )?;
    let lambda_max = (-top.values[0]).max(0.0);
    let pairs = linalg::lowest_eigenpairs(apply, n, r, opts.tol * 1e-2 * lambda_max, opts.seed)?;
    let mut vectors = DMatrix::from_fn(n, r, |row, c| pairs.vectors[c][row]);
    fix_signs(&mut vectors);
    Ok(SpectralDecomposition {
        eigenvalues: pairs.values,
        vectors,
        residuals: pairs.residuals,
        lambda_max,
        complete: false,
        fingerprint: op.fingerprint(),
    })
}

impl SpectralDecomposition {
    /// Assemble from precomputed eigenpairs (ascending, orthonormal columns).
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        vectors: DMatrix<f64>,
        lambda_max: f64,
        fingerprint: String,
    ) -> Result<Self> {
        if vectors.ncols() != eigenvalues.len() {
            return Err(Error::Dimension {
                expected: eigenvalues.len(),
                got: vectors.ncols(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("eigenvalues must be sorted ascending"));
        }
        let complete = vectors.ncols() == vectors.nrows();
        Ok(SpectralDecomposition {
            residuals: vec![0.0; eigenvalues.len()],
            eigenvalues,
            vectors,
            lambda_max,
            complete,
            fingerprint,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tie_tolerance(&self) -> f64 {
        SPECTRAL_TIE * self.lambda_max
    }

    /// Eigenvalue with kernel noise snapped to zero.
    pub fn eigenvalue(&self, i: usize) -> f64 {
        let l = self.eigenvalues[i];
        if l.abs() <= self.tie_tolerance() {
            0.0
        } else {
            l
        }
    }

    pub fn kernel_dim(&self) -> usize {
        (0..self.rank()).filter(|&i| self.eigenvalue(i) == 0.0).count()
    }

    /// Number of modes in the closed band `[0, omega]`. Errors when the band
    /// may extend past the computed part of a partial spectrum.
    pub fn band_len(&self, omega: f64) -> Result<usize> {
        if !(omega >= 0.0) {
            return Err(Error::domain(format!("bandwidth must be nonnegative, got {omega}")));
        }
        let edge = omega + self.tie_tolerance();
        let count = self.eigenvalues.iter().take_while(|&&l| l <= edge).count();
        if !self.complete && count == self.rank() {
            return Err(Error::domain(format!(
                "band [0, {omega}] reaches past the {} computed eigenpairs",
                self.rank()
            )));
        }
        Ok(count)
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Coefficients `<f, v_i>`.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok((0..self.rank())
            .map(|i| linalg::dot(self.vectors.column(i).as_slice(), f))
            .collect())
    }

    /// `sum_i c_i v_i` over the leading `c.len()` modes.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                linalg::axpy(ci, self.vectors.column(i).as_slice(), &mut out);
            }
        }
        out
    }

    pub fn pw_project(&self, omega: f64, f: &[f64]) -> Result<Vec<f64>> {
        let band = self.band_len(omega)?;
        let c = self.coefficients(f)?;
        Ok(self.synthesize(&c[..band]))
    }

    /// `||(D / scale)^k f||` in the eigenbasis. With `chop`, coefficients
    /// below `chop * ||c||` are dropped first; high powers otherwise amplify
    /// roundoff sitting on the top of the spectrum.
    pub fn power_norm_scaled(&self, f: &[f64], k: u32, scale: f64, chop: Option<f64>) -> Result<f64> {
        let c = self.coefficients(f)?;
        Ok(self.power_norm_of_coefficients(&c, k, scale, chop))
    }

    pub fn power_norm_of_coefficients(&self, c: &[f64], k: u32, scale: f64, chop: Option<f64>) -> f64 {
        let cut = chop.map_or(0.0, |t| t * linalg::norm(c));
        let terms: Vec<f64> = c
            .iter()
            .enumerate()
            .map(|(i, &ci)| {
                if ci.abs() < cut {
                    0.0
                } else {
                    ci * (self.eigenvalue(i) / scale).powi(k as i32)
                }
            })
            .collect();
        linalg::norm(&terms)
    }

    /// `||D^k f||`, unscaled.
    pub fn power_norm(&self, f: &[f64], k: u32) -> Result<f64> {
        self.power_norm_scaled(f, k, 1.0, None)
    }

    /// Energy of `f` strictly above `omega`, counting anything outside the
    /// computed modes of a partial spectrum.
    pub fn energy_above(&self, omega: f64, f: &[f64]) -> Result<f64> {
        let c = self.coefficients(f)?;
        let edge = omega + self.tie_tolerance();
        let inside: f64 = c
            .iter()
            .zip(&self.eigenvalues)
            .filter(|(_, &l)| l <= edge)
            .map(|(ci, _)| ci * ci)
            .sum();
        let total = if self.complete {
            c.iter().map(|x| x * x).sum()
        } else {
            linalg::dot(f, f)
        };
        Ok((total - inside).max(0.0))
    }

    pub fn bernstein_check(&self, f: &[f64], omega: f64, k_max: u32) -> Result<PWReport> {
        self.bernstein_check_tol(f, omega, k_max, 1e-10)
    }

    /// Ratios `||D^k f|| / (omega^k ||f||)`. The verdict follows the spectral
    /// energy above `omega` relative to `||f||^2`.
    pub fn bernstein_check_tol(&self, f: &[f64], omega: f64, k_max: u32, tol: f64) -> Result<PWReport> {
        if k_max == 0 {
            return Err(Error::domain("k_max must be at least 1"));
        }
        let fnorm = linalg::norm(f);
        if fnorm == 0.0 {
            return Err(Error::domain("Bernstein check needs a nonzero vector"));
        }
        if omega.is_nan() || omega < 0.0 {
            let energy = self.energy_above(0.0, f)?;
            return Ok(PWReport {
                omega,
                ratios: vec![f64::INFINITY; k_max as usize],
                verdict: PWVerdict::OutOfSpace,
                energy_above: energy / (fnorm * fnorm),
                tolerance: tol,
            });
        }
        let c = self.coefficients(f)?;
        let ratios = (1..=k_max)
            .map(|k| {
                let p = self.power_norm_of_coefficients(&c, k, 1.0, None);
                if omega == 0.0 {
                    if p <= tol * fnorm * self.lambda_max.powi(k as i32) {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    self.power_norm_of_coefficients(&c, k, omega, None) / fnorm
                }
            })
            .collect();
        let energy = self.energy_above(omega, f)? / (fnorm * fnorm);
        let verdict = if energy <= tol {
            PWVerdict::InSpace
        } else {
            PWVerdict::OutOfSpace
        };
        Ok(PWReport {
            omega,
            ratios,
            verdict,
            energy_above: energy,
            tolerance: tol,
        })
    }

    /// Smallest eigenvalue `omega` such that the energy above it is at most
    /// `energy_tol * ||f||^2`.
    pub fn min_bandwidth(&self, f: &[f64], energy_tol: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&energy_tol) {
            return Err(Error::domain(format!("energy tolerance must be in [0, 1), got {energy_tol}")));
        }
        let c = self.coefficients(f)?;
        let total: f64 = if self.complete {
            c.iter().map(|x| x * x).sum()
        } else {
            linalg::dot(f, f)
        };
        if total == 0.0 {
            return Ok(0.0);
        }
        let budget = energy_tol * total;
        let mut above = total;
        for i in 0..self.rank() {
            above -= c[i] * c[i];
            // a tie group ends at i
            let group_end = i + 1 == self.rank() || self.eigenvalues[i + 1] > self.eigenvalues[i] + self.tie_tolerance();
            if group_end && above <= budget + 1e-15 * total {
                return Ok(self.eigenvalue(i));
            }
        }
        if self.complete {
            Ok(self.eigenvalue(self.rank() - 1))
        } else {
            Err(Error::domain("bandwidth lies past the computed eigenpairs"))
        }
    }

    /// Unit vector with independent standard normal coefficients on the band.
    pub fn random_pw(&self, omega: f64, seed: u64) -> Result<Vec<f64>> {
        let band = self.band_len(omega)?;
        if band == 0 {
            return Err(Error::domain(format!("no eigenvalue in [0, {omega}]")));
        }
        let mut rng = seeded_rng(seed);
        let c = gaussian_vector(band, &mut rng);
        let mut f = self.synthesize(&c);
        linalg::normalize(&mut f);
        Ok(f)
    }

    /// Spectrum CSV with columns `index,eigenvalue,residual`; kernel noise is
    /// written as 0.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue", "residual"])?;
        for (i, r) in self.residuals.iter().enumerate() {
            w.write_record([i.to_string(), format!("{:e}", self.eigenvalue(i)), format!("{r:e}")])?;
        }
        w.flush().map_err(|e| Error::io("<spectrum csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PWVerdict {
    InSpace,
    OutOfSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PWReport {
    pub omega: f64,
    /// `ratios[k-1] = ||D^k f|| / (omega^k ||f||)`.
    pub ratios: Vec<f64>,
    pub verdict: PWVerdict,
    /// Fraction of `||f||^2` above `omega`.
    pub energy_above: f64,
    pub tolerance: f64,
}

impl PWReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}
