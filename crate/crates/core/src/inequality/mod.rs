//! Empirical checks of the sampling inequalities: the power inequality for
//! `A^m`, Plancherel-Polya constants on functions vanishing on a lattice,
//! the equivalence of sampled and Sobolev-type norms, and uniqueness scans.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, gaussian_vector, seeded_rng};
use crate::operator::{apply_power_scaled, Backend, SampleSet, SamplingGeometry, SymmetricOperator};
use crate::spectral::{DecomposeOptions, SpectralDecomposition};
use crate::splines::{reconstruct, ReconstructOptions, Verdict};

/// Relative singular value threshold separating rank from roundoff.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Row {
    pub m: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub a: f64,
    pub b: f64,
    pub hypothesis_rhs: f64,
    pub rows: Vec<Lemma2Row>,
}

impl Lemma2Report {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.holds).count()
    }
}

/// Given `||f|| <= b + a ||A f||`, checks `||f|| <= m b + 8^{m-1} a^m ||A^m f||`
/// for `m = 1, 2, 4, ..., 2^l_max`.
pub fn lemma2_verify(decomp: &SpectralDecomposition, f: &[f64], a: f64, b: f64, l_max: u32) -> Result<Lemma2Report> {
    if !(a > 0.0) || !(b >= 0.0) {
        return Err(Error::domain(format!("need a > 0 and b >= 0, got a = {a}, b = {b}")));
    }
    if !decomp.is_complete() {
        return Err(Error::Precondition("power inequality needs a full eigendecomposition".into()));
    }
    let fnorm = linalg::norm(f);
    let hypothesis_rhs = b + a * decomp.power_norm(f, 1)?;
    if fnorm > hypothesis_rhs * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "hypothesis fails: ||f|| = {fnorm:e} > b + a||Af|| = {hypothesis_rhs:e}"
        )));
    }
    let rows = (0..=l_max)
        .map(|l| {
            let m = 1u32 << l;
            let pn = decomp.power_norm(f, m)?;
            // 8^{m-1} a^m ||A^m f|| in logs
            let term = if pn == 0.0 {
                0.0
            } else {
                ((m as f64 - 1.0) * 8f64.ln() + m as f64 * a.ln() + pn.ln()).exp()
            };
            let rhs = m as f64 * b + term;
            Ok(Lemma2Row {
                m,
                lhs: fnorm,
                rhs,
                holds: fnorm <= rhs * (1.0 + 1e-8),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Lemma2Report {
        a,
        b,
        hypothesis_rhs,
        rows,
    })
}

/// Random `B^T B / n` with `B` a `rank x n` gaussian matrix. The upper
/// triangle is mirrored so the result is exactly symmetric.
pub fn random_psd_operator(n: usize, rank: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Result<SymmetricOperator> {
    if n == 0 || rank == 0 || rank > n {
        return Err(Error::domain(format!("need 0 < rank <= n, got rank {rank}, n {n}")));
    }
    let b = DMatrix::from_column_slice(rank, n, &gaussian_vector(rank * n, rng));
    let a = b.transpose() * &b / n as f64;
    let upper = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), a[(i, j)]))
        .collect();
    Ok(SymmetricOperator::from_upper(n, &upper, Backend::Graph))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    Extremal,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub quantity: String,
    pub level: i32,
    pub k: u32,
    /// `sup ||f|| / ||D^k f||` over nonzero `f` vanishing on the samples;
    /// infinite when `D^k` has a kernel there.
    pub value: f64,
    pub infinite: bool,
    pub method: EstimateMethod,
    pub certificate_residual: f64,
    /// `value^{1/k} 2^{-j/(2Q)}`, Heisenberg only.
    pub normalized_q: Option<f64>,
    /// `value^{1/k} 2^{-j/2}`, Heisenberg only.
    pub normalized_half: Option<f64>,
    /// Maximizer (unit norm, zero on the samples) or kernel witness.
    #[serde(skip)]
    pub extremal: Option<Vec<f64>>,
}

fn normalizations(op: &SymmetricOperator, level: i32, k: u32, value: f64) -> (Option<f64>, Option<f64>) {
    match op.backend() {
        Backend::Heisenberg { .. } if value.is_finite() && value > 0.0 => {
            let q = op.backend().homogeneous_dimension().expect("heisenberg") as f64;
            let root = value.powf(1.0 / k as f64);
            let j = level as f64;
            (Some(root * 2f64.powf(-j / (2.0 * q))), Some(root * 2f64.powf(-j / 2.0)))
        }
        _ => (None, None),
    }
}

/// Reciprocal of the smallest singular value of `D^k` on the free
/// coordinates. Uses the eigenbasis when a full decomposition is given, and
/// Lanczos on the normal operator from a random start otherwise.
pub fn plancherel_polya_constant(
    op: &SymmetricOperator,
    decomp: Option<&SpectralDecomposition>,
    samples: &SampleSet,
    k: u32,
    seed: u64,
) -> Result<ConstantEstimate> {
    let n = op.dim();
    if k == 0 {
        return Err(Error::domain("order must be at least 1"));
    }
    let free = samples.complement(n);
    let base = ConstantEstimate {
        quantity: "C_emp".into(),
        level: samples.level,
        k,
        value: 0.0,
        infinite: false,
        method: EstimateMethod::Extremal,
        certificate_residual: 0.0,
        normalized_q: None,
        normalized_half: None,
        extremal: None,
    };
    if free.is_empty() {
        return Ok(base);
    }
    let embed = |z: &[f64]| {
        let mut x = vec![0.0; n];
        for (&i, zi) in free.iter().zip(z) {
            x[i] = *zi;
        }
        x
    };
    let (sigma_min, sigma_max, y, method, certificate) = match decomp.filter(|d| d.is_complete()) {
        Some(d) => {
            let kd = d.kernel_dim();
            if kd > 0 {
                // D^k f = 0 for some nonzero f vanishing on the samples iff
                // the kernel modes are dependent on the samples.
                let kg = DMatrix::from_fn(samples.len(), kd, |r, c| d.vectors()[(samples.indices[r], c)]);
                let s = if samples.is_empty() {
                    None
                } else {
                    Some(linalg::singular_summary(&kg, RANK_THRESHOLD)?)
                };
                if s.as_ref().is_none_or(|s| s.rank < kd) {
                    let c = s.map(|s| s.min_right_vector).unwrap_or_else(|| {
                        let mut e = vec![0.0; kd];
                        e[0] = 1.0;
                        e
                    });
                    let mut witness = vec![0.0; n];
                    for (j, cj) in c.iter().enumerate() {
                        linalg::axpy(*cj, &d.vector(j), &mut witness);
                    }
                    linalg::normalize(&mut witness);
                    let leak = linalg::norm(&samples.restrict(&witness));
                    return Ok(ConstantEstimate {
                        value: f64::INFINITY,
                        infinite: true,
                        certificate_residual: leak,
                        extremal: Some(witness),
                        ..base
                    });
                }
            }
            let scale = d.lambda_max().max(f64::MIN_POSITIVE);
            // Rows of (Lambda / lambda_max)^k V^T on the free columns, heaviest
            // first, kernel rows dropped.
            let rows: Vec<usize> = (kd..d.rank()).rev().collect();
            let v = d.vectors();
            let m = DMatrix::from_fn(rows.len(), free.len(), |r, c| {
                let i = rows[r];
                (d.eigenvalue(i) / scale).powi(k as i32) * v[(free[c], i)]
            });
            let (smin, y, resid) = linalg::PivotedQr::new(m).min_singular_value(seed)?;
            (smin * scale.powi(k as i32), 0.0, y, EstimateMethod::Extremal, resid)
        }
        None => {
            let scale = op.gershgorin_bound().max(f64::MIN_POSITIVE);
            let gram = |z: &[f64]| {
                let x = embed(z);
                let y = apply_power_scaled(op, 2 * k as usize, &x, scale).expect("dimension checked");
                free.iter().map(|&i| y[i]).collect::<Vec<f64>>()
            };
            let tol = DecomposeOptions::default().tol * 1e-2;
            let pairs = linalg::lowest_eigenpairs(&gram, free.len(), 1, tol, seed)?;
            let y = pairs.vectors[0].clone();
            let sk = scale.powi(k as i32);
            let smin = pairs.values[0].max(0.0).sqrt() * sk;
            (smin, sk, y, EstimateMethod::Randomized, pairs.residuals[0])
        }
    };
    let infinite = sigma_min == 0.0 || sigma_min <= RANK_THRESHOLD * sigma_max;
    let value = if infinite { f64::INFINITY } else { 1.0 / sigma_min };
    let mut extremal = embed(&y);
    linalg::normalize(&mut extremal);
    let (normalized_q, normalized_half) = normalizations(op, samples.level, k, value);
    Ok(ConstantEstimate {
        value,
        infinite,
        method,
        certificate_residual: certificate,
        normalized_q,
        normalized_half,
        extremal: Some(extremal),
        ..base
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub k: u32,
    pub trials: usize,
    /// Extremes of `(||D^k f|| + ||f|_Gamma||) / (||f|| + ||D^k f||)`.
    pub lower: f64,
    pub upper: f64,
    pub candidates: usize,
    #[serde(skip)]
    pub witness: Option<Vec<f64>>,
}

fn lemma5_ratio(decomp: &SpectralDecomposition, samples: &SampleSet, k: u32, f: &[f64]) -> Result<f64> {
    let dk = decomp.power_norm(f, k)?;
    let sampled = linalg::norm(&samples.restrict(f));
    let sobolev = linalg::norm(f) + dk;
    Ok((dk + sampled) / sobolev)
}

/// Ratio of the sampled norm `||D^k f|| + ||f|_Gamma||` to the Sobolev-type
/// norm `||f|| + ||D^k f||` over random vectors and structured candidates.
pub fn lemma5_ratio_scan(
    decomp: &SpectralDecomposition,
    op: &SymmetricOperator,
    samples: &SampleSet,
    k: u32,
    trials: usize,
    seed: u64,
) -> Result<Lemma5Report> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    if !decomp.is_complete() {
        return Err(Error::Precondition("ratio scan needs a full eigendecomposition".into()));
    }
    let n = decomp.dim();
    // Kernel vectors vanishing on the samples make the sampled norm degenerate.
    let kdim = decomp.kernel_dim();
    if kdim > 0 {
        let rows = DMatrix::from_fn(samples.len(), kdim, |r, c| decomp.vectors()[(samples.indices[r], c)]);
        let s = linalg::singular_summary(&rows, RANK_THRESHOLD)?;
        if s.rank < kdim {
            let mut w = decomp.synthesize(&s.min_right_vector);
            linalg::normalize(&mut w);
            let upper = lemma5_ratio(decomp, samples, k, &vec![1.0; n])?;
            return Ok(Lemma5Report {
                k,
                trials,
                lower: 0.0,
                upper,
                candidates: 1,
                witness: Some(w),
            });
        }
    }
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    candidates.push(vec![1.0; n]);
    for &g in &samples.indices {
        let mut e = vec![0.0; n];
        e[g] = 1.0;
        candidates.push(e);
    }
    let pp = plancherel_polya_constant(op, Some(decomp), samples, k, seed)?;
    if let Some(x) = pp.extremal {
        candidates.push(x);
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..trials {
        candidates.push(gaussian_vector(n, &mut rng));
    }
    let ratios: Vec<f64> = candidates
        .iter()
        .map(|f| lemma5_ratio(decomp, samples, k, f))
        .collect::<Result<_>>()?;
    Ok(Lemma5Report {
        k,
        trials,
        lower: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        upper: ratios.iter().copied().fold(0.0, f64::max),
        candidates: ratios.len(),
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub omega: f64,
    pub band_dim: usize,
    pub sample_count: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rank: usize,
    /// Unit band-limited vector vanishing on the samples when rank-deficient.
    pub witness: Option<Vec<f64>>,
}

impl UniquenessReport {
    pub fn is_unique(&self) -> bool {
        self.rank == self.band_dim
    }
}

/// Rank of the samples of the band's eigenvectors.
pub fn uniqueness_test(decomp: &SpectralDecomposition, omega: f64, samples: &SampleSet) -> Result<UniquenessReport> {
    let band = decomp.band_len(omega)?;
    if band == 0 {
        return Err(Error::domain(format!("band [0, {omega}] contains no eigenvalue")));
    }
    let m = DMatrix::from_fn(samples.len(), band, |r, c| decomp.vectors()[(samples.indices[r], c)]);
    let s = linalg::singular_summary(&m, RANK_THRESHOLD)?;
    let witness = (s.rank < band).then(|| {
        let mut w = decomp.synthesize(&s.min_right_vector);
        linalg::normalize(&mut w);
        w
    });
    Ok(UniquenessReport {
        omega,
        band_dim: band,
        sample_count: samples.len(),
        sigma_min: s.sigma_min,
        sigma_max: s.sigma_max,
        rank: s.rank,
        witness,
    })
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub omega: f64,
    /// Levels, coarse to fine (descending).
    pub levels: Vec<i32>,
    pub base_stride: usize,
    pub anchor: usize,
    pub k: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub j: i32,
    pub k: u32,
    pub sample_count: usize,
    pub band_dim: usize,
    pub sigma_min: f64,
    pub c_emp: f64,
    pub e_final: f64,
    pub verdict: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub omega: f64,
    pub rows: Vec<ScanRow>,
    /// Coarsest level at and below which every scanned level converged.
    pub transition_level: Option<i32>,
}

impl ScanTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "k", "sigma_min", "C_emp", "e_final", "verdict"])?;
        for r in &self.rows {
            w.write_record([
                r.j.to_string(),
                r.k.to_string(),
                format!("{:e}", r.sigma_min),
                format!("{:e}", r.c_emp),
                format!("{:e}", r.e_final),
                r.verdict.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<scan csv>", e))?;
        Ok(())
    }
}

/// Orders `1, 2, 4, ...` up to and including `k`.
pub fn doubling_schedule(k: u32) -> Vec<u32> {
    let mut s: Vec<u32> = std::iter::successors(Some(1u32), |&x| x.checked_mul(2)).take_while(|&x| x < k).collect();
    s.push(k.max(1));
    s
}

/// For each level: uniqueness of the band on the lattice, the
/// Plancherel-Polya constant at order `k`, and reconstruction of a random
/// band-limited target with the doubling schedule up to `k`.
pub fn critical_density_scan(
    op: &SymmetricOperator,
    decomp: &SpectralDecomposition,
    geometry: &SamplingGeometry,
    opts: &ScanOptions,
) -> Result<ScanTable> {
    if opts.levels.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("scan levels must be strictly descending (coarse to fine)"));
    }
    let target = decomp.random_pw(opts.omega, opts.seed)?;
    let schedule = doubling_schedule(opts.k);
    let rows: Vec<ScanRow> = opts
        .levels
        .par_iter()
        .map(|&j| {
            let mut row = ScanRow {
                j,
                k: opts.k,
                sample_count: 0,
                band_dim: 0,
                sigma_min: f64::NAN,
                c_emp: f64::NAN,
                e_final: f64::NAN,
                verdict: "failed".into(),
                error: None,
            };
            let mut cell = || -> Result<()> {
                let samples = geometry.lattice(j, opts.base_stride, opts.anchor)?;
                row.sample_count = samples.len();
                let pp = plancherel_polya_constant(op, Some(decomp), &samples, opts.k, opts.seed)?;
                row.c_emp = pp.value;
                let rep = reconstruct(
                    op,
                    decomp,
                    &target,
                    &samples,
                    &schedule,
                    &ReconstructOptions {
                        omega: Some(opts.omega),
                        ..Default::default()
                    },
                )?;
                row.sigma_min = rep.sigma_min;
                row.band_dim = rep.band_dim;
                row.e_final = rep.errors.last().copied().unwrap_or(f64::NAN);
                row.verdict = rep.verdict.to_string();
                if let Some(fail) = rep.failure {
                    row.error = Some(fail.message);
                }
                Ok(())
            };
            if let Err(e) = cell() {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();
    // Walk from the finest level up while reconstruction keeps converging.
    let mut transition_level = None;
    for r in rows.iter().rev() {
        if r.verdict == Verdict::Converged.to_string() {
            transition_level = Some(r.j);
        } else {
            break;
        }
    }
    Ok(ScanTable {
        omega: opts.omega,
        rows,
        transition_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_circle_laplacian, build_graph_laplacian};
    use crate::spectral::{decompose, DecomposeMode};
    use std::collections::BTreeMap;

    fn full(op: &SymmetricOperator) -> SpectralDecomposition {
        decompose(op, DecomposeMode::Full, &DecomposeOptions::default()).unwrap()
    }

    #[test]
    fn lemma2_identity_and_kernel_cases() {
        let upper: BTreeMap<(usize, usize), f64> = (0..4).map(|i| ((i, i), 3.0)).collect();
        let op = SymmetricOperator::from_upper(4, &upper, Backend::Graph);
        let d = full(&op);
        let f = [1.0, -2.0, 0.5, 0.0];
        // a = 1/3 makes a||Af|| = ||f||
        let rep = lemma2_verify(&d, &f, 1.0 / 3.0, 0.0, 3).unwrap();
        assert_eq!(rep.violations(), 0);
        for r in &rep.rows {
            let expected = 8f64.powi(r.m as i32 - 1) * r.lhs;
            assert!((r.rhs - expected).abs() <= 1e-10 * expected);
        }

        let op = build_circle_laplacian(6, 1.0).unwrap();
        let d = full(&op);
        let ones = vec![1.0; 6];
        let rep = lemma2_verify(&d, &ones, 5.0, linalg::norm(&ones), 3).unwrap();
        assert_eq!(rep.violations(), 0);
        assert!(matches!(lemma2_verify(&d, &ones, 5.0, 0.0, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn plancherel_polya_matches_dense_svd() {
        let op = build_circle_laplacian(8, 1.0).unwrap();
        let d = full(&op);
        let samples = SampleSet::explicit(8, [0, 2, 4, 6]).unwrap();
        let est = plancherel_polya_constant(&op, Some(&d), &samples, 1, 0).unwrap();
        // oracle: columns 1,3,5,7 of D
        let dense = op.to_dense();
        let cols = DMatrix::from_fn(8, 4, |r, c| dense[(r, 2 * c + 1)]);
        let smin = cols.svd(false, false).singular_values.min();
        assert!((est.value - 1.0 / smin).abs() <= 1e-6 * est.value);
        assert!(est.certificate_residual <= 1e-6);
        assert_eq!(est.method, EstimateMethod::Extremal);

        let all = SampleSet::explicit(8, 0..8).unwrap();
        assert_eq!(plancherel_polya_constant(&op, Some(&d), &all, 1, 0).unwrap().value, 0.0);

        let more = SampleSet::explicit(8, [0, 1, 2, 4, 6]).unwrap();
        let est2 = plancherel_polya_constant(&op, Some(&d), &more, 1, 0).unwrap();
        assert!(est2.value <= est.value * (1.0 + 1e-12));

        let randomized = plancherel_polya_constant(&op, None, &samples, 1, 5).unwrap();
        assert_eq!(randomized.method, EstimateMethod::Randomized);
        assert!((randomized.value - est.value).abs() <= 1e-6 * est.value);
    }

    #[test]
    fn uniqueness_examples() {
        let op = build_circle_laplacian(16, 1.0).unwrap();
        let d = full(&op);
        let all = SampleSet::explicit(16, 0..16).unwrap();
        let omega = d.eigenvalue(6);
        let rep = uniqueness_test(&d, omega, &all).unwrap();
        assert_eq!(rep.band_dim, 7);
        assert!((rep.sigma_min - 1.0).abs() < 1e-12);

        let stride2 = SamplingGeometry::Circle { n: 16 }.lattice(0, 2, 0).unwrap();
        let rep = uniqueness_test(&d, omega, &stride2).unwrap();
        assert!(rep.is_unique() && rep.witness.is_none());
        let m = DMatrix::from_fn(8, 7, |r, c| d.vectors()[(stride2.indices[r], c)]);
        let oracle = m.svd(false, false).singular_values.min();
        assert!((rep.sigma_min - oracle).abs() < 1e-10);

        let stride4 = SamplingGeometry::Circle { n: 16 }.lattice(0, 4, 1).unwrap();
        let rep = uniqueness_test(&d, omega, &stride4).unwrap();
        assert!(!rep.is_unique());
        let w = rep.witness.unwrap();
        assert!((linalg::norm(&w) - 1.0).abs() < 1e-12);
        assert!(stride4.restrict(&w).iter().all(|x| x.abs() <= 1e-8));
        assert!(d.energy_above(omega, &w).unwrap() < 1e-20);
    }

    #[test]
    fn lemma5_bounds_are_positive_and_witnessed() {
        let op = build_circle_laplacian(32, 1.0).unwrap();
        let d = full(&op);
        let samples = SamplingGeometry::Circle { n: 32 }.lattice(0, 4, 0).unwrap();
        let rep = lemma5_ratio_scan(&d, &op, &samples, 2, 100, 1).unwrap();
        assert!(rep.lower > 0.0 && rep.upper.is_finite() && rep.lower <= rep.upper);

        let op = build_graph_laplacian(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let d = full(&op);
        let samples = SampleSet::explicit(4, [0, 1]).unwrap();
        let rep = lemma5_ratio_scan(&d, &op, &samples, 1, 10, 1).unwrap();
        assert_eq!(rep.lower, 0.0);
        let w = rep.witness.unwrap();
        assert!(lemma5_ratio(&d, &samples, 1, &w).unwrap() < 1e-8);
    }

    #[test]
    fn doubling_schedule_shape() {
        assert_eq!(doubling_schedule(1), vec![1]);
        assert_eq!(doubling_schedule(8), vec![1, 2, 4, 8]);
        assert_eq!(doubling_schedule(6), vec![1, 2, 4, 6]);
    }

    #[test]
    fn scan_on_small_circle() {
        let n = 64;
        let op = build_circle_laplacian(n, 1.0).unwrap();
        let d = full(&op);
        let omega = d.eigenvalue(8);
        let table = critical_density_scan(
            &op,
            &d,
            &SamplingGeometry::Circle { n },
            &ScanOptions {
                omega,
                levels: vec![3, 2, 1, 0],
                base_stride: 1,
                anchor: 0,
                k: 8,
                seed: 2,
            },
        )
        .unwrap();
        let first = &table.rows[0];
        assert_eq!(first.sample_count, 8);
        assert_eq!(first.verdict, "aliased");
        let last = table.rows.last().unwrap();
        assert!(last.e_final <= 1e-8, "{last:?}");
        assert!(table.transition_level.is_some());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("j,k,sigma_min,C_emp,e_final,verdict\n"));
    }
}
