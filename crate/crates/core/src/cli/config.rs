use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub backend: BackendConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Alternative to `omega`: the band is the lowest `band_dim` modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<u32>>,
    /// Spline order for the `spline` verb.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Circle {
        n: usize,
        #[serde(default = "one")]
        h: f64,
    },
    Heisenberg {
        m: usize,
        h: f64,
        t_extent: f64,
        xy_extent: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        node_cap: Option<usize>,
    },
    Graph {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
    },
    MatrixMarket {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumConfig {
    #[default]
    Full,
    Lowest {
        r: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingConfig {
    Lattice {
        level: i32,
        #[serde(default = "one_usize")]
        base_stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<usize>,
    },
    Indices {
        indices: Vec<usize>,
    },
    All,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    RandomPw {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// CSV whose last column holds the values, with or without a header.
    VectorFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub levels: Vec<i32>,
    #[serde(default = "one_usize")]
    pub base_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<usize>,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Symmetry,
    Lemma2,
    Bernstein,
    PlancherelPolya,
    Lemma5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub lemma2: Lemma2Suite,
    #[serde(default)]
    pub bernstein: BernsteinSuite,
    #[serde(default)]
    pub plancherel_polya: PlancherelPolyaSuite,
    #[serde(default)]
    pub lemma5: Lemma5Suite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma2Suite {
    pub operators: usize,
    pub n: usize,
    pub l_max: u32,
}

impl Default for Lemma2Suite {
    fn default() -> Self {
        Lemma2Suite {
            operators: 100,
            n: 50,
            l_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BernsteinSuite {
    pub vectors: usize,
    pub k_max: u32,
}

impl Default for BernsteinSuite {
    fn default() -> Self {
        BernsteinSuite { vectors: 50, k_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlancherelPolyaSuite {
    pub orders: Vec<u32>,
    /// Descending, coarse to fine.
    pub levels: Vec<i32>,
    pub base_stride: usize,
}

impl Default for PlancherelPolyaSuite {
    fn default() -> Self {
        PlancherelPolyaSuite {
            orders: vec![2, 4],
            levels: vec![2, 1, 0],
            base_stride: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma5Suite {
    pub k: u32,
    pub trials: usize,
    pub level: i32,
    pub base_stride: usize,
}

impl Default for Lemma5Suite {
    fn default() -> Self {
        Lemma5Suite {
            k: 2,
            trials: 1000,
            level: 0,
            base_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Eigen-residual tolerance relative to `lambda_max`.
    pub eigen: f64,
    /// Energy tolerance for measured bandwidths.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen: 1e-8,
            energy: 1e-12,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and makes file references absolute relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let BackendConfig::MatrixMarket { path } = &mut cfg.backend {
            resolve(path);
        }
        if let Some(TargetConfig::VectorFile(p)) = &mut cfg.target {
            resolve(p);
        }
        Ok(cfg)
    }
}
