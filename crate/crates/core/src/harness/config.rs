//! Experiment configuration read from a `key = value` file with dotted sections.
//!
//! ```text
//! metric = "bump"
//! bump.amplitude = 0.3
//! domain.radius = 1.0
//! source.kind = "bump"
//! source.coefficients = [1.0]
//! grid.xi_window = 64.0
//! suite = "all"
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{GeoError, Result};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Bump,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SourceKindCfg {
    Bump,
    Zero,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum TaperCfg {
    None,
    Cosine,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorCfg {
    Spectral,
    Kinetic,
    Both,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Geodesic,
    Forward,
    Kinetic,
    Spectrum,
    Lemmas,
    Recover,
    Uniqueness,
    All,
}

impl Suite {
    /// Suites in execution order.
    pub fn expand(self) -> Vec<Suite> {
        use Suite::*;
        match self {
            All => vec![Geodesic, Forward, Kinetic, Spectrum, Lemmas, Recover, Uniqueness],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geodesic => "geodesic",
            Suite::Forward => "forward",
            Suite::Kinetic => "kinetic",
            Suite::Spectrum => "spectrum",
            Suite::Lemmas => "lemmas",
            Suite::Recover => "recover",
            Suite::Uniqueness => "uniqueness",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BumpCfg {
    pub amplitude: f64,
    pub exponent: i32,
}

impl Default for BumpCfg {
    fn default() -> Self {
        BumpCfg {
            amplitude: 0.3,
            exponent: 7,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DomainCfg {
    pub radius: f64,
    pub padding: f64,
}

impl Default for DomainCfg {
    fn default() -> Self {
        DomainCfg {
            radius: 1.0,
            padding: 0.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SourceCfg {
    pub kind: SourceKindCfg,
    /// Row-major `(n-1) x (n-1)` block.
    pub coefficients: Vec<f64>,
    pub radius: f64,
    pub exponent: u32,
}

impl Default for SourceCfg {
    fn default() -> Self {
        SourceCfg {
            kind: SourceKindCfg::Bump,
            coefficients: vec![1.0],
            radius: 1.0,
            exponent: 6,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridCfg {
    pub xi_window: f64,
    pub xi_intervals: usize,
    /// Arclength step of the geodesic integrator.
    pub step: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Recovery probe size; 0 selects `0.05 ×` chart radius.
    pub eps: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub taper: TaperCfg,
    /// Evaluation centers per axis for field recovery.
    pub lattice: usize,
    /// Half-width of the center lattice.
    pub lattice_extent: f64,
    /// Random rays per geodesic check.
    pub rays: usize,
    /// Reduced `ξ¹` window for the transport and characteristic checks.
    pub check_window: f64,
    pub check_intervals: usize,
    /// Arclength step for rays feeding the reduced-window checks.
    pub check_step: f64,
    /// Random probes for the characteristic check.
    pub probes: usize,
}

impl Default for GridCfg {
    fn default() -> Self {
        GridCfg {
            xi_window: 64.0,
            xi_intervals: 4096,
            step: 1e-3,
            fd_step: 1e-3,
            eps: 0.0,
            rho_min: 0.01,
            rho_max: 1.0,
            taper: TaperCfg::Cosine,
            lattice: 3,
            lattice_extent: 0.3,
            rays: 50,
            check_window: 8.0,
            check_intervals: 128,
            check_step: 4e-3,
            probes: 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricKind,
    pub dimension: usize,
    pub bump: BumpCfg,
    pub domain: DomainCfg,
    pub source: SourceCfg,
    pub grid: GridCfg,
    pub suite: Suite,
    pub estimator: EstimatorCfg,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            metric: MetricKind::Bump,
            dimension: 2,
            bump: BumpCfg::default(),
            domain: DomainCfg::default(),
            source: SourceCfg::default(),
            grid: GridCfg::default(),
            suite: Suite::All,
            estimator: EstimatorCfg::Kinetic,
            seed: 7,
            output: PathBuf::from("out"),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line holding the last segment of a dotted key, or 0 when absent.
fn line_of_key(text: &str, key: &str) -> usize {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.starts_with(key) || l.starts_with(leaf)
        })
        .map(|i| i + 1)
        .unwrap_or(0)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| GeoError::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GeoError::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let err = |key: &str, message: String| GeoError::Config {
            line: line_of_key(text, key),
            message,
        };
        let positive = [
            ("bump.amplitude", self.bump.amplitude, self.metric == MetricKind::Bump),
            ("domain.radius", self.domain.radius, true),
            ("domain.padding", self.domain.padding, true),
            ("source.radius", self.source.radius, true),
            ("grid.xi_window", self.grid.xi_window, true),
            ("grid.step", self.grid.step, true),
            ("grid.fd_step", self.grid.fd_step, true),
            ("grid.rho_min", self.grid.rho_min, true),
            ("grid.rho_max", self.grid.rho_max, true),
            ("grid.lattice_extent", self.grid.lattice_extent, true),
            ("grid.check_window", self.grid.check_window, true),
            ("grid.check_step", self.grid.check_step, true),
        ];
        for (key, v, active) in positive {
            if active && !(v > 0.0) {
                return Err(err(key, format!("{key} must be positive, got {v}")));
            }
        }
        if self.grid.eps < 0.0 {
            return Err(err("grid.eps", "grid.eps must be >= 0".into()));
        }
        if !(2..=3).contains(&self.dimension) {
            return Err(err("dimension", format!("dimension must be 2 or 3, got {}", self.dimension)));
        }
        if self.grid.xi_intervals < 64 || !self.grid.xi_intervals.is_multiple_of(2) {
            return Err(err("grid.xi_intervals", "grid.xi_intervals must be even and >= 64".into()));
        }
        if self.grid.rho_min > self.grid.rho_max {
            return Err(err("grid.rho_min", "grid.rho_min exceeds grid.rho_max".into()));
        }
        if self.grid.check_intervals < 16 || !self.grid.check_intervals.is_multiple_of(2) {
            return Err(err("grid.check_intervals", "grid.check_intervals must be even and >= 16".into()));
        }
        for (key, v) in [("grid.lattice", self.grid.lattice), ("grid.rays", self.grid.rays), ("grid.probes", self.grid.probes)] {
            if v == 0 {
                return Err(err(key, format!("{key} must be positive")));
            }
        }
        if self.source.kind == SourceKindCfg::Bump {
            let k = self.dimension - 1;
            if self.source.coefficients.len() != k * k {
                return Err(err(
                    "source.coefficients",
                    format!("source.coefficients needs {} entries for dimension {}", k * k, self.dimension),
                ));
            }
            if self.source.exponent < 6 {
                return Err(err("source.exponent", "source.exponent must be >= 6".into()));
            }
        }
        Ok(())
    }
}
