//! Config-driven command line driver.
//!
//! Every verb computes all of its outputs in memory first; files are only
//! written once the run has succeeded, so a failure never leaves partial
//! artifacts behind. Exit codes: 0 success, 1 failed verdict or check,
//! 2 usage or configuration error.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inequality::{self, lemma2_verify, lemma5_ratio_scan, plancherel_polya_constant, ScanOptions};
use crate::linalg::{self, gaussian_vector, seeded_rng};
use crate::operator::{
    build_circle_laplacian, build_graph_laplacian, build_grid, heisenberg_sublaplacian, market, Backend, Grid,
    SampleSet, SamplingGeometry, SymmetricOperator, DEFAULT_NODE_CAP,
};
use crate::spectral::{decompose, DecomposeMode, DecomposeOptions, PWVerdict, SpectralDecomposition};
use crate::splines::{
    alpha_l2_report, delta_support_residual, reconstruct, ReconstructOptions, SplineOptions, SplineSolver, Verdict,
};
use config::{BackendConfig, ExperimentConfig, SamplingConfig, SpectrumConfig, Suite, TargetConfig};

#[derive(Debug, Parser)]
#[command(name = "pwspline", version, about = "Band-limited sampling and variational splines on discrete operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replace the seed from the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Exit 1 unless reconstruction converges.
    #[arg(long, global = true)]
    expect_converged: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the operator and write it as Matrix Market.
    Build,
    /// Eigendecomposition to CSV.
    Spectrum {
        /// Read the operator from a Matrix Market file instead of a config.
        #[arg(long)]
        operator: Option<PathBuf>,
        /// Only the lowest R eigenpairs.
        #[arg(long, value_name = "R")]
        lowest: Option<usize>,
    },
    /// Project the target onto the band and check Bernstein ratios.
    Project,
    /// Variational spline through the target's samples.
    Spline,
    /// Reconstruction error against the spline order schedule.
    Reconstruct,
    /// Density scan over sampling levels.
    Scan,
    /// Inequality suites.
    Verify,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let jobs = cli.jobs.unwrap_or(1).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return 2;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        _ => 1,
    }
}

/// Files produced by one run, keyed by name.
#[derive(Default)]
struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file via a temporary name, then the manifest. On any
    /// failure the files already placed are removed again.
    fn commit(mut self, dir: &Path, manifest: &mut Manifest) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        manifest.outputs = self
            .files
            .iter()
            .map(|(name, bytes)| OutputEntry {
                file: name.clone(),
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect();
        let mut m = serde_json::to_vec_pretty(manifest)?;
        m.push(b'\n');
        self.files.insert("manifest.json".into(), m);
        let mut placed: Vec<PathBuf> = Vec::new();
        let mut result = Ok(());
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            let step = std::fs::write(&tmp, bytes)
                .and_then(|_| std::fs::rename(&tmp, &target))
                .map_err(|e| {
                    let _ = std::fs::remove_file(&tmp);
                    Error::io(&target, e)
                });
            match step {
                Ok(()) => placed.push(target),
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        if result.is_err() {
            for p in placed {
                let _ = std::fs::remove_file(p);
            }
        }
        result
    }
}

#[derive(Debug, Serialize)]
struct OutputEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Timing {
    stage: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    config_hash: Option<String>,
    seed: Option<u64>,
    operator_fingerprint: String,
    timings: Vec<Timing>,
    outputs: Vec<OutputEntry>,
}

struct Timer {
    timings: Vec<Timing>,
}

impl Timer {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push(Timing {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

/// Operator plus whatever geometry the backend knows about.
struct Built {
    op: SymmetricOperator,
    geometry: Option<SamplingGeometry>,
    description: serde_json::Value,
}

fn build_operator(cfg: &ExperimentConfig) -> Result<Built> {
    match &cfg.backend {
        BackendConfig::Circle { n, h } => Ok(Built {
            op: build_circle_laplacian(*n, *h)?,
            geometry: Some(SamplingGeometry::Circle { n: *n }),
            description: serde_json::json!({"kind": "circle", "n": n, "h": h}),
        }),
        BackendConfig::Heisenberg {
            m,
            h,
            t_extent,
            xy_extent,
            node_cap,
        } => {
            let grid = build_grid(*m, *t_extent, *xy_extent, *h, node_cap.unwrap_or(DEFAULT_NODE_CAP))?;
            let description = serde_json::json!({"kind": "heisenberg", "grid": grid});
            Ok(Built {
                op: heisenberg_sublaplacian(&grid),
                geometry: Some(SamplingGeometry::Heisenberg(grid)),
                description,
            })
        }
        BackendConfig::Graph { n, edges } => Ok(Built {
            op: build_graph_laplacian(*n, edges)?,
            geometry: None,
            description: serde_json::json!({"kind": "graph", "n": n, "edges": edges.len()}),
        }),
        BackendConfig::MatrixMarket { path } => {
            let op = market::read_file(path)?;
            let geometry = match op.backend() {
                Backend::Circle => Some(SamplingGeometry::Circle { n: op.dim() }),
                _ => None,
            };
            Ok(Built {
                description: serde_json::json!({"kind": "matrix_market", "backend": op.backend()}),
                op,
                geometry,
            })
        }
    }
}

fn default_anchor(geometry: &SamplingGeometry) -> usize {
    match geometry {
        SamplingGeometry::Heisenberg(grid) => center_node(grid),
        SamplingGeometry::Circle { .. } => 0,
    }
}

fn center_node(grid: &Grid) -> usize {
    let mid: Vec<usize> = (0..grid.axes()).map(|a| grid.axis_len(a) / 2).collect();
    grid.node(&mid)
}

fn lattice(built: &Built, level: i32, base_stride: usize, anchor: Option<usize>) -> Result<SampleSet> {
    let geometry = built
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Config("lattice sampling needs a circle or heisenberg backend".into()))?;
    geometry.lattice(level, base_stride, anchor.unwrap_or_else(|| default_anchor(geometry)))
}

fn sample_set(cfg: &ExperimentConfig, built: &Built) -> Result<SampleSet> {
    let n = built.op.dim();
    match cfg.sampling.as_ref().ok_or_else(|| Error::Config("missing `sampling`".into()))? {
        SamplingConfig::All => SampleSet::explicit(n, 0..n),
        SamplingConfig::Indices { indices } => SampleSet::explicit(n, indices.iter().copied())
            .map_err(|e| Error::Config(format!("sampling.indices: {e}"))),
        SamplingConfig::Lattice {
            level,
            base_stride,
            anchor,
        } => lattice(built, *level, *base_stride, *anchor),
    }
}

fn decomposition(cfg: &ExperimentConfig, op: &SymmetricOperator, lowest: Option<usize>) -> Result<SpectralDecomposition> {
    let opts = DecomposeOptions {
        tol: cfg.tolerances.eigen,
        seed: cfg.seed,
        ..Default::default()
    };
    let mode = match (lowest, &cfg.spectrum) {
        (Some(r), _) => DecomposeMode::Lowest(r),
        (None, SpectrumConfig::Lowest { r }) => DecomposeMode::Lowest(*r),
        (None, SpectrumConfig::Full) => DecomposeMode::Full,
    };
    decompose(op, mode, &opts)
}

fn resolve_omega(cfg: &ExperimentConfig, decomp: &SpectralDecomposition) -> Result<Option<f64>> {
    match (cfg.omega, cfg.band_dim) {
        (Some(_), Some(_)) => Err(Error::Config("give either `omega` or `band_dim`, not both".into())),
        (Some(w), None) => {
            if !(w >= 0.0) {
                return Err(Error::Config(format!("omega must be nonnegative, got {w}")));
            }
            Ok(Some(w))
        }
        (None, Some(b)) => {
            if b == 0 || b > decomp.rank() {
                return Err(Error::Config(format!("band_dim {b} outside 1..={}", decomp.rank())));
            }
            let w = decomp.eigenvalue(b - 1);
            if decomp.band_len(w)? != b {
                return Err(Error::Config(format!(
                    "band_dim {b} splits a repeated eigenvalue; the closed band [0, {w}] has {} modes",
                    decomp.band_len(w)?
                )));
            }
            Ok(Some(w))
        }
        (None, None) => Ok(None),
    }
}

fn read_vector(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!("{}: line {}: not a number: {last:?}", path.display(), i + 1)))
            }
        }
    }
    if out.len() != n {
        return Err(Error::Config(format!("{}: expected {n} values, found {}", path.display(), out.len())));
    }
    Ok(out)
}

fn target(cfg: &ExperimentConfig, decomp: &SpectralDecomposition, omega: Option<f64>) -> Result<Vec<f64>> {
    match cfg.target.as_ref().ok_or_else(|| Error::Config("missing `target`".into()))? {
        TargetConfig::RandomPw { seed } => {
            let w = omega.ok_or_else(|| Error::Config("random_pw target needs `omega` or `band_dim`".into()))?;
            decomp.random_pw(w, seed.unwrap_or(cfg.seed))
        }
        TargetConfig::VectorFile(path) => read_vector(path, decomp.dim()),
    }
}

fn vector_csv(values: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:e}")])?;
    }
    w.into_inner().map_err(|e| Error::io("<vector csv>", e.into_error()))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut timer = Timer { timings: Vec::new() };
    let mut artifacts = Artifacts::default();

    // `spectrum --operator FILE` works without a config.
    let cfg = match (&cli.config, &cli.command) {
        (Some(path), _) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(seed) = cli.seed_override {
                cfg.seed = seed;
            }
            Some(cfg)
        }
        (None, Command::Spectrum { operator: Some(_), .. }) => None,
        (None, _) => return Err(Error::Config("--config is required for this command".into())),
    };

    let mut code = 0;
    let (verb, fingerprint) = match &cli.command {
        Command::Spectrum { operator: Some(path), lowest } => {
            let op = timer.stage("load", || market::read_file(path))?;
            let fallback = ExperimentConfig {
                seed: cli.seed_override.unwrap_or(0),
                backend: BackendConfig::MatrixMarket { path: path.clone() },
                spectrum: SpectrumConfig::Full,
                omega: None,
                band_dim: None,
                sampling: None,
                schedule: None,
                order: None,
                target: None,
                scan: None,
                verify: None,
                tolerances: Default::default(),
            };
            let c = cfg.as_ref().unwrap_or(&fallback);
            let decomp = timer.stage("decompose", || decomposition(c, &op, *lowest))?;
            artifacts.add("spectrum.csv", csv_bytes(|b| decomp.write_csv(b))?);
            ("spectrum", op.fingerprint())
        }
        command => {
            let cfg = cfg.as_ref().expect("config loaded above");
            let built = timer.stage("build", || build_operator(cfg))?;
            let fp = built.op.fingerprint();
            let verb = match command {
                Command::Build => {
                    artifacts.add("operator.mtx", market::to_string(&built.op).into_bytes());
                    artifacts.add_json("geometry.json", &built.description)?;
                    println!("fingerprint {fp}");
                    "build"
                }
                Command::Spectrum { lowest, .. } => {
                    let decomp = timer.stage("decompose", || decomposition(cfg, &built.op, *lowest))?;
                    artifacts.add("spectrum.csv", csv_bytes(|b| decomp.write_csv(b))?);
                    "spectrum"
                }
                Command::Project => {
                    cmd_project(cfg, &built, &mut timer, &mut artifacts)?;
                    "project"
                }
                Command::Spline => {
                    cmd_spline(cfg, &built, &mut timer, &mut artifacts)?;
                    "spline"
                }
                Command::Reconstruct => {
                    let verdict = cmd_reconstruct(cfg, &built, &mut timer, &mut artifacts)?;
                    println!("verdict {verdict}");
                    if cli.expect_converged && verdict != Verdict::Converged {
                        code = 1;
                    }
                    "reconstruct"
                }
                Command::Scan => {
                    cmd_scan(cfg, &built, &mut timer, &mut artifacts)?;
                    "scan"
                }
                Command::Verify => {
                    let failures = cmd_verify(cfg, &built, &mut timer, &mut artifacts)?;
                    println!("verify: {failures} failing checks");
                    if failures > 0 {
                        code = 1;
                    }
                    "verify"
                }
            };
            (verb, fp)
        }
    };

    let config_hash = match &cfg {
        Some(c) => {
            let resolved = serde_json::to_vec_pretty(c)?;
            let hash = hex::encode(Sha256::digest(&resolved));
            let mut bytes = resolved;
            bytes.push(b'\n');
            artifacts.add("config.resolved.json", bytes);
            Some(hash)
        }
        None => None,
    };
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: verb.to_string(),
        config_hash,
        seed: cfg.as_ref().map(|c| c.seed),
        operator_fingerprint: fingerprint,
        timings: timer.timings,
        outputs: Vec::new(),
    };
    artifacts.commit(&cli.out, &mut manifest)?;
    Ok(code)
}

fn cmd_project(cfg: &ExperimentConfig, built: &Built, timer: &mut Timer, artifacts: &mut Artifacts) -> Result<()> {
    let decomp = timer.stage("decompose", || decomposition(cfg, &built.op, None))?;
    let omega = resolve_omega(cfg, &decomp)?.ok_or_else(|| Error::Config("project needs `omega` or `band_dim`".into()))?;
    let f = target(cfg, &decomp, Some(omega))?;
    let p = decomp.pw_project(omega, &f)?;
    let report = serde_json::json!({
        "omega": omega,
        "band_dim": decomp.band_len(omega)?,
        "target": decomp.bernstein_check(&f, omega, 8)?,
        "projection": if linalg::norm(&p) > 0.0 { Some(decomp.bernstein_check(&p, omega, 8)?) } else { None },
    });
    artifacts.add("projected.csv", vector_csv(&p)?);
    artifacts.add_json("pw_report.json", &report)
}

fn cmd_spline(cfg: &ExperimentConfig, built: &Built, timer: &mut Timer, artifacts: &mut Artifacts) -> Result<()> {
    let k = cfg.order.ok_or_else(|| Error::Config("spline needs `order`".into()))?;
    let decomp = timer.stage("decompose", || decomposition(cfg, &built.op, None))?;
    let omega = resolve_omega(cfg, &decomp)?;
    let f = target(cfg, &decomp, omega)?;
    let samples = sample_set(cfg, built)?;
    let solver = SplineSolver::new(&built.op, Some(&decomp), SplineOptions::default())?;
    let s = timer.stage("solve", || solver.solve(k, &samples, &samples.restrict(&f)))?;
    let report = serde_json::json!({
        "order": k,
        "sample_count": samples.len(),
        "interpolation_residual": s.interpolation_residual,
        "objective": s.objective,
        "delta_support_residual": delta_support_residual(&built.op, Some(&decomp), k, &s)?,
        "alpha": alpha_l2_report(&s),
        "diagnostics": s.diagnostics,
    });
    artifacts.add("spline.csv", csv_bytes(|b| s.write_csv(b))?);
    artifacts.add_json("spline_report.json", &report)
}

fn cmd_reconstruct(
    cfg: &ExperimentConfig,
    built: &Built,
    timer: &mut Timer,
    artifacts: &mut Artifacts,
) -> Result<Verdict> {
    let decomp = timer.stage("decompose", || decomposition(cfg, &built.op, None))?;
    let omega = resolve_omega(cfg, &decomp)?;
    let f = target(cfg, &decomp, omega)?;
    let samples = sample_set(cfg, built)?;
    let schedule = match &cfg.schedule {
        Some(s) => s.clone(),
        None => {
            // k = 2^l Q for l = 1, 2, 3 where a homogeneous dimension exists
            let q = built.op.backend().homogeneous_dimension().unwrap_or(1) as u32;
            vec![2 * q, 4 * q, 8 * q]
        }
    };
    let opts = ReconstructOptions {
        omega,
        ..Default::default()
    };
    let report = timer.stage("reconstruct", || reconstruct(&built.op, &decomp, &f, &samples, &schedule, &opts))?;
    artifacts.add_json("report.json", &report)?;
    artifacts.add("errors.csv", csv_bytes(|b| report.write_csv(b))?);
    Ok(report.verdict)
}

fn cmd_scan(cfg: &ExperimentConfig, built: &Built, timer: &mut Timer, artifacts: &mut Artifacts) -> Result<()> {
    let scan = cfg.scan.as_ref().ok_or_else(|| Error::Config("missing `scan`".into()))?;
    let geometry = built
        .geometry
        .as_ref()
        .ok_or_else(|| Error::Config("scan needs a circle or heisenberg backend".into()))?;
    let decomp = timer.stage("decompose", || decomposition(cfg, &built.op, None))?;
    let omega = resolve_omega(cfg, &decomp)?.ok_or_else(|| Error::Config("scan needs `omega` or `band_dim`".into()))?;
    let opts = ScanOptions {
        omega,
        levels: scan.levels.clone(),
        base_stride: scan.base_stride,
        anchor: scan.anchor.unwrap_or_else(|| default_anchor(geometry)),
        k: scan.k,
        seed: cfg.seed,
    };
    let table = timer.stage("scan", || inequality::critical_density_scan(&built.op, &decomp, geometry, &opts))?;
    artifacts.add("scan.csv", csv_bytes(|b| table.write_csv(b))?);
    artifacts.add_json("scan.json", &table)
}

#[derive(Debug, Serialize)]
struct Check {
    suite: &'static str,
    case: String,
    quantity: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

fn cmd_verify(cfg: &ExperimentConfig, built: &Built, timer: &mut Timer, artifacts: &mut Artifacts) -> Result<usize> {
    let vcfg = cfg.verify.as_ref().ok_or_else(|| Error::Config("missing `verify`".into()))?;
    let mut checks: Vec<Check> = Vec::new();
    let needs_spectrum = vcfg
        .suites
        .iter()
        .any(|s| matches!(s, Suite::Bernstein | Suite::PlancherelPolya | Suite::Lemma5));
    let decomp = if needs_spectrum {
        Some(timer.stage("decompose", || decomposition(cfg, &built.op, None))?)
    } else {
        None
    };
    for suite in &vcfg.suites {
        match suite {
            Suite::Symmetry => {
                let a = built.op.max_asymmetry();
                checks.push(Check {
                    suite: "symmetry",
                    case: "operator".into(),
                    quantity: "max_asymmetry",
                    value: a,
                    bound: 0.0,
                    pass: a == 0.0,
                });
            }
            Suite::Lemma2 => timer.stage("lemma2", || {
                let s = &vcfg.lemma2;
                let mut rng = seeded_rng(cfg.seed ^ 0x1e44a2);
                for i in 0..s.operators {
                    let rank = if i % 2 == 0 { s.n } else { s.n / 2 };
                    let op = inequality::random_psd_operator(s.n, rank.max(1), &mut rng)?;
                    let d = decompose(&op, DecomposeMode::Full, &DecomposeOptions::default())?;
                    let f = gaussian_vector(s.n, &mut rng);
                    let (fnorm, afnorm) = (linalg::norm(&f), d.power_norm(&f, 1)?);
                    // alternate a pure-a and a split (a, b) hypothesis
                    let (a, b) = if i % 2 == 0 { (fnorm / afnorm, 0.0) } else { (fnorm / (2.0 * afnorm), fnorm / 2.0) };
                    let rep = lemma2_verify(&d, &f, a, b, s.l_max)?;
                    let worst = rep.rows.iter().map(|r| r.rhs / r.lhs).fold(f64::INFINITY, f64::min);
                    checks.push(Check {
                        suite: "lemma2",
                        case: format!("operator_{i}"),
                        quantity: "min_rhs_over_lhs",
                        value: worst,
                        bound: 1.0 - 1e-8,
                        pass: rep.violations() == 0,
                    });
                }
                Ok(())
            })?,
            Suite::Bernstein => timer.stage("bernstein", || {
                let d = decomp.as_ref().expect("decomposed");
                let omega = resolve_omega(cfg, d)?
                    .ok_or_else(|| Error::Config("bernstein suite needs `omega` or `band_dim`".into()))?;
                let s = &vcfg.bernstein;
                let mut rng = seeded_rng(cfg.seed ^ 0xbe5);
                for i in 0..s.vectors {
                    let f = d.random_pw(omega, cfg.seed.wrapping_add(i as u64))?;
                    let rep = d.bernstein_check(&f, omega, s.k_max)?;
                    checks.push(Check {
                        suite: "bernstein",
                        case: format!("in_band_{i}"),
                        quantity: "max_ratio",
                        value: rep.max_ratio(),
                        bound: 1.0 + 1e-10,
                        pass: rep.max_ratio() <= 1.0 + 1e-10 && rep.verdict == PWVerdict::InSpace,
                    });
                    if d.band_len(omega)? < d.rank() {
                        let g = gaussian_vector(d.dim(), &mut rng);
                        let rep = d.bernstein_check(&g, omega, s.k_max)?;
                        checks.push(Check {
                            suite: "bernstein",
                            case: format!("out_of_band_{i}"),
                            quantity: "max_ratio",
                            value: rep.max_ratio(),
                            bound: 1.0,
                            pass: rep.max_ratio() > 1.0 && rep.verdict == PWVerdict::OutOfSpace,
                        });
                    }
                }
                Ok(())
            })?,
            Suite::PlancherelPolya => timer.stage("plancherel_polya", || {
                let d = decomp.as_ref().expect("decomposed");
                let s = &vcfg.plancherel_polya;
                let mut roots: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
                for &k in &s.orders {
                    let mut previous: Option<(i32, f64)> = None;
                    for &j in &s.levels {
                        let samples = lattice(built, j, s.base_stride, None)?;
                        let est = plancherel_polya_constant(&built.op, Some(d), &samples, k, cfg.seed)?;
                        checks.push(Check {
                            suite: "plancherel_polya",
                            case: format!("j{j}_k{k}"),
                            quantity: "C_emp",
                            value: est.value,
                            bound: f64::INFINITY,
                            pass: est.value.is_finite() && est.certificate_residual <= 1e-6,
                        });
                        roots.entry(j).or_default().push(est.value.powf(1.0 / k as f64));
                        if let Some((pj, pv)) = previous {
                            checks.push(Check {
                                suite: "plancherel_polya",
                                case: format!("j{j}_vs_j{pj}_k{k}"),
                                quantity: "C_emp_ratio_fine_over_coarse",
                                value: est.value / pv,
                                bound: 1.0,
                                pass: est.value <= pv * (1.0 + 1e-12),
                            });
                        }
                        previous = Some((j, est.value));
                    }
                }
                for (j, r) in roots {
                    let spread = r.iter().copied().fold(0.0, f64::max) / r.iter().copied().fold(f64::INFINITY, f64::min);
                    checks.push(Check {
                        suite: "plancherel_polya",
                        case: format!("j{j}"),
                        quantity: "root_spread_across_k",
                        value: spread,
                        bound: 2.0,
                        pass: spread <= 2.0,
                    });
                }
                Ok(())
            })?,
            Suite::Lemma5 => timer.stage("lemma5", || {
                let d = decomp.as_ref().expect("decomposed");
                let s = &vcfg.lemma5;
                let samples = lattice(built, s.level, s.base_stride, None)?;
                let rep = lemma5_ratio_scan(d, &built.op, &samples, s.k, s.trials, cfg.seed)?;
                let ok = rep.lower > 0.0 && rep.upper.is_finite();
                for (quantity, value) in [("lower", rep.lower), ("upper", rep.upper)] {
                    checks.push(Check {
                        suite: "lemma5",
                        case: format!("j{}_k{}", s.level, s.k),
                        quantity,
                        value,
                        bound: 0.0,
                        pass: ok,
                    });
                }
                Ok(())
            })?,
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "case", "quantity", "value", "bound", "pass"])?;
    for c in &checks {
        w.write_record([
            c.suite.to_string(),
            c.case.clone(),
            c.quantity.to_string(),
            format!("{:e}", c.value),
            format!("{:e}", c.bound),
            c.pass.to_string(),
        ])?;
    }
    artifacts.add("verify.csv", w.into_inner().map_err(|e| Error::io("<verify csv>", e.into_error()))?);
    let failures = checks.iter().filter(|c| !c.pass).count();
    artifacts.add_json(
        "verify.json",
        &serde_json::json!({"checks": checks, "failures": failures, "pass": failures == 0}),
    )?;
    Ok(failures)
}
