//! Variational splines: interpolants of sampled data minimizing `||D^k u||`.
//!
//! The sampled coordinates are fixed and the free ones eliminated, leaving
//! an unconstrained least-squares problem. With a full eigendecomposition it
//! is solved as `min || W V^T u ||` with `W = diag((lambda_i / lambda_max)^k)`,
//! rows sorted by decreasing weight before a column-pivoted QR; the weights
//! span hundreds of orders of magnitude at high `k` and the normal equations
//! would be hopeless. Without a full spectrum the reduced normal equations
//! are solved by conjugate gradients, which is only certified at small `k`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequality::{uniqueness_test, UniquenessReport};
use crate::linalg::{self, PivotedQr};
use crate::operator::{apply_power_scaled, Backend, SampleSet, SymmetricOperator};
use crate::spectral::{SpectralDecomposition, DEFAULT_ENERGY_TOL};

/// Coefficients below this fraction of the coefficient norm are ignored when
/// measuring `||D^k f||` of a target; high powers otherwise measure roundoff.
pub const SEMINORM_CHOP: f64 = 1e-13;

/// Absolute slack, relative to `||u||^2`, in the energy identity check.
pub const IDENTITY_FLOOR: f64 = 1e-14;

/// Errors at or below this level count as already converged.
pub const ERROR_FLOOR: f64 = 1e-10;

/// Upper bound on refinement corrections after a reference-path solve.
pub const REFINE_STEPS: usize = 6;

/// `(D / lambda_scale)^{2k} u` carries absolute roundoff of a few `eps * max|u|`
/// whatever the spline; below this multiple of `max|u|` its entries are not
/// resolved and the stationarity ratio is taken against the floor instead.
pub const STATIONARITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineOptions {
    pub k_cap: u32,
    /// Largest order the conjugate-gradient path accepts.
    pub iterative_k_cap: u32,
    /// Adds `ridge_eps * ||u||^2` in units where `lambda_max = 1`.
    pub ridge: bool,
    pub ridge_eps: f64,
    pub cg_tol: f64,
    pub cg_max_iter: Option<usize>,
}

impl Default for SplineOptions {
    fn default() -> Self {
        SplineOptions {
            k_cap: 64,
            iterative_k_cap: 4,
            ridge: false,
            ridge_eps: 1e-12,
            cg_tol: 1e-10,
            cg_max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    Reference,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub path: SolverPath,
    pub iterations: usize,
    /// Relative residual for CG; off-sample stationarity for the reference path.
    pub final_residual: f64,
    pub ridge: bool,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSolution {
    pub values: Vec<f64>,
    pub order: u32,
    pub samples: SampleSet,
    pub sample_values: Vec<f64>,
    pub interpolation_residual: f64,
    /// `||D^k u||`; may overflow to infinity for large `k`, see
    /// `objective_normalized`.
    pub objective: f64,
    /// `||(D / lambda_scale)^k u||`.
    pub objective_normalized: f64,
    pub lambda_scale: f64,
    /// `((D / lambda_scale)^{2k} u)` at the sample nodes.
    pub alpha_normalized: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl SplineSolution {
    /// `alpha_gamma = (D^{2k} u)(x_gamma)` in operator units.
    pub fn alpha(&self) -> Vec<f64> {
        let s = self.lambda_scale.powi(2 * self.order as i32);
        self.alpha_normalized.iter().map(|a| a * s).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "value", "sampled"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), format!("{v:e}"), (self.samples.contains(i) as u8).to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<spline csv>", e))?;
        Ok(())
    }
}

pub struct SplineSolver<'a> {
    op: &'a SymmetricOperator,
    decomp: Option<&'a SpectralDecomposition>,
    opts: SplineOptions,
}

enum Factor {
    /// Least squares `min ||a_free z + a_sampled v||`.
    Reference { qr: PivotedQr, a_sampled: DMatrix<f64> },
    Iterative,
    /// Every node is sampled.
    Trivial,
}

/// Factorization for one `(k, samples)` pair, reusable across data vectors.
pub struct PreparedSpline<'a> {
    solver: &'a SplineSolver<'a>,
    k: u32,
    samples: SampleSet,
    free: Vec<usize>,
    factor: Factor,
    flags: Vec<String>,
}

impl<'a> SplineSolver<'a> {
    pub fn new(
        op: &'a SymmetricOperator,
        decomp: Option<&'a SpectralDecomposition>,
        opts: SplineOptions,
    ) -> Result<Self> {
        if let Some(d) = decomp {
            if d.dim() != op.dim() {
                return Err(Error::Dimension {
                    expected: op.dim(),
                    got: d.dim(),
                });
            }
            if d.fingerprint() != op.fingerprint() {
                return Err(Error::Precondition(
                    "decomposition was computed for a different operator".into(),
                ));
            }
        }
        Ok(SplineSolver { op, decomp, opts })
    }

    pub fn op(&self) -> &SymmetricOperator {
        self.op
    }

    pub fn options(&self) -> &SplineOptions {
        &self.opts
    }

    fn reference(&self) -> Option<&'a SpectralDecomposition> {
        self.decomp.filter(|d| d.is_complete())
    }

    pub fn path(&self) -> SolverPath {
        if self.reference().is_some() {
            SolverPath::Reference
        } else {
            SolverPath::Iterative
        }
    }

    /// Scale dividing the operator before powering.
    pub fn lambda_scale(&self) -> f64 {
        let s = match self.decomp {
            Some(d) => d.lambda_max(),
            None => self.op.gershgorin_bound(),
        };
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn prepare(&'a self, k: u32, samples: &SampleSet) -> Result<PreparedSpline<'a>> {
        let n = self.op.dim();
        if k == 0 {
            return Err(Error::domain("spline order must be at least 1"));
        }
        if k > self.opts.k_cap {
            return Err(Error::domain(format!("order {k} exceeds the cap {}", self.opts.k_cap)));
        }
        if samples.is_empty() {
            return Err(Error::domain("sample set is empty"));
        }
        if let Some(&last) = samples.indices.last() {
            if last >= n {
                return Err(Error::Dimension {
                    expected: n,
                    got: last + 1,
                });
            }
        }
        let mut flags = Vec::new();
        if let Backend::Heisenberg { .. } = self.op.backend() {
            let q = self.op.backend().homogeneous_dimension().unwrap_or(0);
            if 4 * (k as usize) < q {
                flags.push(format!("order {k} is below Q/4 = {}", q as f64 / 4.0));
            }
        }
        let free = samples.complement(n);
        let factor = if free.is_empty() {
            Factor::Trivial
        } else if let Some(d) = self.reference() {
            self.reference_factor(d, k, samples, &free)?
        } else {
            if k > self.opts.iterative_k_cap {
                return Err(Error::Precondition(format!(
                    "order {k} is beyond the certified range of the iterative solver (k <= {})",
                    self.opts.iterative_k_cap
                )));
            }
            Factor::Iterative
        };
        Ok(PreparedSpline {
            solver: self,
            k,
            samples: samples.clone(),
            free,
            factor,
            flags,
        })
    }

    fn reference_factor(
        &self,
        d: &SpectralDecomposition,
        k: u32,
        samples: &SampleSet,
        free: &[usize],
    ) -> Result<Factor> {
        let n = d.dim();
        if !self.opts.ridge {
            // A kernel vector vanishing on the samples is invisible to the
            // functional and can be added to any minimizer.
            let kdim = d.kernel_dim();
            if kdim > 0 {
                let kernel_rows = DMatrix::from_fn(samples.len(), kdim, |r, c| d.vectors()[(samples.indices[r], c)]);
                let s = linalg::singular_summary(&kernel_rows, 1e-8)?;
                if s.rank < kdim {
                    let mut w = vec![0.0; n];
                    for (c, y) in s.min_right_vector.iter().enumerate() {
                        linalg::axpy(*y, d.vectors().column(c).as_slice(), &mut w);
                    }
                    linalg::normalize(&mut w);
                    return Err(Error::NonUnique { witness: w });
                }
            }
        }
        let scale = self.lambda_scale();
        // (weight, eigen-row or ridge row for free column)
        enum Row {
            Mode(usize),
            Ridge(usize),
        }
        let mut rows: Vec<(f64, Row)> = (0..d.rank())
            .map(|i| ((d.eigenvalue(i) / scale).powi(k as i32), Row::Mode(i)))
            .filter(|(w, _)| *w > 0.0)
            .collect();
        if self.opts.ridge {
            let w = self.opts.ridge_eps.sqrt();
            rows.extend((0..free.len()).map(|c| (w, Row::Ridge(c))));
        }
        if rows.len() < free.len() {
            return Err(Error::Solver {
                what: format!("order-{k} weights underflow; {} usable rows for {} unknowns", rows.len(), free.len()),
                residual: f64::INFINITY,
            });
        }
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let v = d.vectors();
        let a_free = DMatrix::from_fn(rows.len(), free.len(), |r, c| match rows[r] {
            (w, Row::Mode(i)) => w * v[(free[c], i)],
            (w, Row::Ridge(j)) => {
                if j == c {
                    w
                } else {
                    0.0
                }
            }
        });
        let a_sampled = DMatrix::from_fn(rows.len(), samples.len(), |r, c| match rows[r] {
            (w, Row::Mode(i)) => w * v[(samples.indices[c], i)],
            (_, Row::Ridge(_)) => 0.0,
        });
        Ok(Factor::Reference {
            qr: PivotedQr::new(a_free),
            a_sampled,
        })
    }

    pub fn solve(&self, k: u32, samples: &SampleSet, values: &[f64]) -> Result<SplineSolution> {
        self.prepare(k, samples)?.solve(values)
    }

    /// `(D / lambda_scale)^p u`.
    fn normalized_power(&self, p: u32, u: &[f64]) -> Result<Vec<f64>> {
        let scale = self.lambda_scale();
        match self.reference() {
            Some(d) => {
                let c = d.coefficients(u)?;
                let c: Vec<f64> = c
                    .iter()
                    .enumerate()
                    .map(|(i, ci)| ci * (d.eigenvalue(i) / scale).powi(p as i32))
                    .collect();
                Ok(d.synthesize(&c))
            }
            None => apply_power_scaled(self.op, p as usize, u, scale),
        }
    }
}

impl PreparedSpline<'_> {
    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn solve(&self, values: &[f64]) -> Result<SplineSolution> {
        let solver = self.solver;
        let n = solver.op.dim();
        if values.len() != self.samples.len() {
            return Err(Error::Dimension {
                expected: self.samples.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sample values must be finite"));
        }
        let mut u = vec![0.0; n];
        for (&i, &v) in self.samples.indices.iter().zip(values) {
            u[i] = v;
        }
        let (iterations, cg_residual) = match &self.factor {
            Factor::Trivial => (0, 0.0),
            Factor::Reference { qr, a_sampled } => {
                let rhs: Vec<f64> = (a_sampled * nalgebra::DVector::from_column_slice(values))
                    .iter()
                    .map(|x| -x)
                    .collect();
                let z = qr.solve_least_squares(&rhs)?;
                for (&i, zi) in self.free.iter().zip(z) {
                    u[i] = zi;
                }
                (self.refine(&mut u, qr)?, 0.0)
            }
            Factor::Iterative => {
                let out = self.solve_iterative(&u)?;
                for (&i, zi) in self.free.iter().zip(&out.x) {
                    u[i] = *zi;
                }
                (out.iterations, out.relative_residual)
            }
        };
        let interpolation_residual = self
            .samples
            .indices
            .iter()
            .zip(values)
            .map(|(&i, v)| (u[i] - v).abs())
            .fold(0.0, f64::max);

        let scale = solver.lambda_scale();
        let k = self.k;
        let dk = solver.normalized_power(k, &u)?;
        let objective_normalized = linalg::norm(&dk);
        let objective = if objective_normalized == 0.0 {
            0.0
        } else {
            (k as f64 * scale.ln() + objective_normalized.ln()).exp()
        };
        let d2k = solver.normalized_power(k, &dk)?;
        let alpha_normalized = self.samples.restrict(&d2k);
        let stationarity = off_sample_ratio(&d2k, &u, &self.samples);
        let path = match self.factor {
            Factor::Iterative => SolverPath::Iterative,
            _ => solver.path(),
        };
        Ok(SplineSolution {
            values: u,
            order: k,
            samples: self.samples.clone(),
            sample_values: values.to_vec(),
            interpolation_residual,
            objective,
            objective_normalized,
            lambda_scale: scale,
            alpha_normalized,
            diagnostics: SolverDiagnostics {
                path,
                iterations,
                final_residual: if path == SolverPath::Iterative { cg_residual } else { stationarity },
                ridge: solver.opts.ridge,
                flags: self.flags.clone(),
            },
        })
    }

    /// Gradient of the objective over the free coordinates,
    /// `((D / lambda_scale)^{2k} u)_F + ridge u_F`, with the powers taken in
    /// compensated arithmetic and a power-of-two scale so no step rounds.
    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let solver = self.solver;
        let scale = solver.lambda_scale();
        let pow2 = 2f64.powi(scale.log2().ceil() as i32);
        let ratio = (pow2 / scale).powi(2 * self.k as i32);
        let ridge = if solver.opts.ridge { solver.opts.ridge_eps } else { 0.0 };
        let mut x: Vec<(f64, f64)> = u.iter().map(|&v| (v, 0.0)).collect();
        for _ in 0..2 * self.k {
            x = solver.op.matrix().apply_compensated(&x)?;
            for p in x.iter_mut() {
                *p = (p.0 / pow2, p.1 / pow2);
            }
        }
        Ok(self.free.iter().map(|&i| (x[i].0 + x[i].1) * ratio + ridge * u[i]).collect())
    }

    /// Iterative refinement of a reference-path solution. The factor loses
    /// accuracy with the conditioning of the free block while the gradient
    /// above does not, so a few corrections through the same factor recover
    /// digits the first solve could not. Corrections must at least halve
    /// each step and end below working resolution; when the gradient itself
    /// is unresolved (very high `k`) they do not, and the first solve stands.
    fn refine(&self, u: &mut [f64], qr: &PivotedQr) -> Result<usize> {
        let resolution = 4.0 * f64::EPSILON * linalg::max_abs(u);
        let mut trial = u.to_vec();
        let mut previous = f64::INFINITY;
        for step in 0..REFINE_STEPS {
            let delta = qr.solve_normal(&self.gradient(&trial)?);
            let size = linalg::max_abs(&delta);
            if !size.is_finite() || size > 0.5 * previous {
                return Ok(0);
            }
            if size <= resolution {
                u.copy_from_slice(&trial);
                return Ok(step);
            }
            for (&i, d) in self.free.iter().zip(&delta) {
                trial[i] -= d;
            }
            previous = size;
        }
        Ok(0)
    }

    fn solve_iterative(&self, fixed: &[f64]) -> Result<linalg::CgOutcome> {
        let solver = self.solver;
        let n = solver.op.dim();
        let p = 2 * self.k;
        let ridge = if solver.opts.ridge { solver.opts.ridge_eps } else { 0.0 };
        let full = solver.normalized_power(p, fixed)?;
        let rhs: Vec<f64> = self.free.iter().map(|&i| -full[i]).collect();
        let free = &self.free;
        let apply = |z: &[f64]| {
            let mut x = vec![0.0; n];
            for (&i, zi) in free.iter().zip(z) {
                x[i] = *zi;
            }
            let y = solver.normalized_power(p, &x).expect("dimension checked");
            free.iter().zip(z).map(|(&i, zi)| y[i] + ridge * zi).collect::<Vec<f64>>()
        };
        let max_iter = solver.opts.cg_max_iter.unwrap_or(20 * free.len() + 100);
        match linalg::conjugate_gradient(apply, &rhs, solver.opts.cg_tol, max_iter) {
            Err(Error::NonUnique { witness }) => {
                let mut w = vec![0.0; n];
                for (&i, wi) in free.iter().zip(witness) {
                    w[i] = wi;
                }
                Err(Error::NonUnique { witness: w })
            }
            other => other,
        }
    }

    /// One spline per sample node, interpolating Kronecker data.
    pub fn lagrangian_basis(&self) -> Result<Vec<SplineSolution>> {
        let m = self.samples.len();
        (0..m)
            .into_par_iter()
            .map(|g| {
                let mut data = vec![0.0; m];
                data[g] = 1.0;
                self.solve(&data)
            })
            .collect()
    }
}

/// Off-sample part of `D^{2k} u` relative to its largest entry, or to
/// `STATIONARITY_FLOOR * max|u|` when `D^{2k} u` itself is that small.
fn off_sample_ratio(d2k: &[f64], u: &[f64], samples: &SampleSet) -> f64 {
    let mut off = 0.0f64;
    let mut all = 0.0f64;
    for (i, v) in d2k.iter().enumerate() {
        all = all.max(v.abs());
        if !samples.contains(i) {
            off = off.max(v.abs());
        }
    }
    let floor = STATIONARITY_FLOOR * linalg::max_abs(u);
    if off == 0.0 {
        0.0
    } else {
        off / all.max(floor)
    }
}

/// Spline of order `k` through `values` on `samples`, with default options.
pub fn variational_spline(
    op: &SymmetricOperator,
    decomp: Option<&SpectralDecomposition>,
    k: u32,
    samples: &SampleSet,
    values: &[f64],
) -> Result<SplineSolution> {
    SplineSolver::new(op, decomp, SplineOptions::default())?.solve(k, samples, values)
}

pub fn lagrangian_basis(
    op: &SymmetricOperator,
    decomp: Option<&SpectralDecomposition>,
    k: u32,
    samples: &SampleSet,
) -> Result<Vec<SplineSolution>> {
    let solver = SplineSolver::new(op, decomp, SplineOptions::default())?;
    let prepared = solver.prepare(k, samples)?;
    prepared.lagrangian_basis()
}

/// `max_{i not in samples} |(D^{2k} u)_i| / max_i |(D^{2k} u)_i|`: how far the
/// spline is from `D^{2k} u` being a combination of deltas on the samples.
pub fn delta_support_residual(
    op: &SymmetricOperator,
    decomp: Option<&SpectralDecomposition>,
    k: u32,
    spline: &SplineSolution,
) -> Result<f64> {
    if spline.samples.len() == op.dim() {
        return Ok(0.0);
    }
    let solver = SplineSolver::new(op, decomp, SplineOptions::default())?;
    let dk = solver.normalized_power(k, &spline.values)?;
    let d2k = solver.normalized_power(k, &dk)?;
    Ok(off_sample_ratio(&d2k, &spline.values, &spline.samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    /// `||alpha||_2` in units where the operator is divided by `lambda_scale`.
    pub alpha_norm_normalized: f64,
    /// `||alpha||_2` in operator units; may overflow at high order.
    pub alpha_norm: f64,
    /// `sum_gamma alpha_gamma u(x_gamma)`, normalized units.
    pub identity_lhs: f64,
    /// `||D^k u||^2`, normalized units.
    pub identity_rhs: f64,
    pub relative_gap: f64,
    pub holds: bool,
}

/// Checks `sum alpha_gamma u(x_gamma) = ||D^k u||^2`, which holds when
/// `D^{2k} u` vanishes off the samples.
pub fn alpha_l2_report(spline: &SplineSolution) -> AlphaReport {
    let alpha_norm_normalized = linalg::norm(&spline.alpha_normalized);
    let p = 2.0 * spline.order as f64;
    let alpha_norm = if alpha_norm_normalized == 0.0 {
        0.0
    } else {
        (p * spline.lambda_scale.ln() + alpha_norm_normalized.ln()).exp()
    };
    let lhs: f64 = spline
        .alpha_normalized
        .iter()
        .zip(&spline.sample_values)
        .map(|(a, v)| a * v)
        .sum();
    let rhs = spline.objective_normalized.powi(2);
    let scale = lhs.abs().max(rhs);
    let gap = (lhs - rhs).abs();
    let relative_gap = if scale == 0.0 { 0.0 } else { gap / scale };
    // Both sides carry roundoff of order eps * ||u||^2 in normalized units.
    let floor = IDENTITY_FLOOR * linalg::dot(&spline.values, &spline.values);
    AlphaReport {
        alpha_norm_normalized,
        alpha_norm,
        identity_lhs: lhs,
        identity_rhs: rhs,
        relative_gap,
        holds: gap <= 1e-8 * scale + floor,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem6Ratio {
    pub k: u32,
    /// `(||f - s_k(f)|| / ||D^k f||)^{1/k}`; 0 when `D^k f = 0`.
    pub rho: f64,
    pub error: f64,
    /// `ln ||D^k f||`, or `-inf` when it vanishes.
    pub log_seminorm: f64,
    pub exact_reproduction: bool,
}

fn log_seminorm(solver: &SplineSolver, f: &[f64], k: u32) -> Result<f64> {
    let scale = solver.lambda_scale();
    let normalized = match solver.reference() {
        Some(d) => d.power_norm_scaled(f, k, scale, Some(SEMINORM_CHOP))?,
        None => linalg::norm(&solver.normalized_power(k, f)?),
    };
    Ok(if normalized == 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * scale.ln() + normalized.ln()
    })
}

pub fn theorem6_ratio(
    op: &SymmetricOperator,
    decomp: Option<&SpectralDecomposition>,
    f: &[f64],
    samples: &SampleSet,
    k: u32,
) -> Result<Theorem6Ratio> {
    let solver = SplineSolver::new(op, decomp, SplineOptions::default())?;
    let s = solver.solve(k, samples, &samples.restrict(f))?;
    let error = linalg::norm(&linalg::sub(f, &s.values));
    let log_semi = log_seminorm(&solver, f, k)?;
    if log_semi == f64::NEG_INFINITY {
        return Ok(Theorem6Ratio {
            k,
            rho: 0.0,
            error,
            log_seminorm: log_semi,
            exact_reproduction: true,
        });
    }
    let rho = if error == 0.0 {
        0.0
    } else {
        ((error.ln() - log_semi) / k as f64).exp()
    };
    Ok(Theorem6Ratio {
        k,
        rho,
        error,
        log_seminorm: log_semi,
        exact_reproduction: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Stalled,
    Aliased,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Stalled => "stalled",
            Verdict::Aliased => "aliased",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: usize,
    pub k: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub omega: f64,
    pub level: i32,
    pub schedule: Vec<u32>,
    /// `||f - s_k(f)|| / ||f||` for each completed stage.
    pub errors: Vec<f64>,
    /// `(e ||f|| / ||D^k f||)^{1/k}` for each completed stage.
    pub ratios: Vec<f64>,
    pub sigma_min: f64,
    pub band_dim: usize,
    pub sample_count: usize,
    pub verdict: Verdict,
    pub failure: Option<StageFailure>,
}

impl ConvergenceReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stage", "k", "error", "ratio"])?;
        for (l, (e, r)) in self.errors.iter().zip(&self.ratios).enumerate() {
            w.write_record([l.to_string(), self.schedule[l].to_string(), format!("{e:e}"), format!("{r:e}")])?;
        }
        w.flush().map_err(|e| Error::io("<convergence csv>", e))?;
        Ok(())
    }
}

/// Converged: the last error is 100 times below the first (or at the floor)
/// and no later step increases the error beyond the floor.
pub fn convergence_verdict(errors: &[f64]) -> Verdict {
    let (Some(&first), Some(&last)) = (errors.first(), errors.last()) else {
        return Verdict::Stalled;
    };
    let decayed = last <= (1e-2 * first).max(ERROR_FLOOR);
    let tail_ok = errors.iter().skip(1).zip(errors.iter().skip(2)).all(|(a, b)| *b <= a + ERROR_FLOOR);
    if decayed && tail_ok {
        Verdict::Converged
    } else {
        Verdict::Stalled
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReconstructOptions {
    /// Target band; defaults to the measured bandwidth of `f`.
    pub omega: Option<f64>,
    pub spline: SplineOptions,
}

/// Sample `f` on `samples`, rebuild it with splines of each order in
/// `schedule` and record the relative errors.
pub fn reconstruct(
    op: &SymmetricOperator,
    decomp: &SpectralDecomposition,
    f: &[f64],
    samples: &SampleSet,
    schedule: &[u32],
    opts: &ReconstructOptions,
) -> Result<ConvergenceReport> {
    let fnorm = linalg::norm(f);
    if f.len() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            got: f.len(),
        });
    }
    if fnorm == 0.0 {
        return Err(Error::domain("target vector is zero"));
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("schedule must be nonempty and strictly increasing"));
    }
    let omega = match opts.omega {
        Some(w) => w,
        None => decomp.min_bandwidth(f, DEFAULT_ENERGY_TOL)?,
    };
    let uniq: UniquenessReport = uniqueness_test(decomp, omega, samples)?;
    let solver = SplineSolver::new(op, Some(decomp), opts.spline.clone())?;
    let data = samples.restrict(f);
    let stages: Vec<Result<(f64, f64)>> = schedule
        .par_iter()
        .map(|&k| {
            let s = solver.solve(k, samples, &data)?;
            let err = linalg::norm(&linalg::sub(f, &s.values));
            let log_semi = log_seminorm(&solver, f, k)?;
            let rho = if err == 0.0 || log_semi == f64::NEG_INFINITY {
                0.0
            } else {
                ((err.ln() - log_semi) / k as f64).exp()
            };
            Ok((err / fnorm, rho))
        })
        .collect();
    let mut errors = Vec::new();
    let mut ratios = Vec::new();
    let mut failure = None;
    for (l, stage) in stages.into_iter().enumerate() {
        match stage {
            Ok((e, r)) => {
                errors.push(e);
                ratios.push(r);
            }
            Err(e) => {
                failure = Some(StageFailure {
                    stage: l,
                    k: schedule[l],
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    let verdict = if uniq.rank < uniq.band_dim {
        Verdict::Aliased
    } else if failure.is_some() {
        Verdict::Stalled
    } else {
        convergence_verdict(&errors)
    };
    Ok(ConvergenceReport {
        omega,
        level: samples.level,
        schedule: schedule.to_vec(),
        errors,
        ratios,
        sigma_min: uniq.sigma_min,
        band_dim: uniq.band_dim,
        sample_count: samples.len(),
        verdict,
        failure,
    })
}
