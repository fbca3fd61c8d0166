//! Experiment and domain configuration files (TOML, versioned schema).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::AccelerationScheme;
use crate::domains::{GridBenchmark, GridBenchmarkConfig, NuclearConfig, NuclearDomain, TinyConfig, TinyOracleDomain};
use crate::epscko::EpsckoConfig;
use crate::error::{Error, Result};
use crate::fsa::GdiceConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Nuclear,
    Grid,
    Tiny,
}

impl DomainKind {
    /// Horizon each shipped domain is designed for.
    pub fn default_horizon(self) -> u64 {
        match self {
            DomainKind::Nuclear => 40,
            DomainKind::Grid => crate::domains::grid::HORIZON,
            DomainKind::Tiny => crate::domains::tiny::HORIZON,
        }
    }
}

/// Contents of a domain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub version: u32,
    pub kind: DomainKind,
    pub nuclear: Option<NuclearConfig>,
    pub grid: Option<GridBenchmarkConfig>,
    pub tiny: Option<TinyConfig>,
}

/// A constructed environment of any shipped kind.
#[derive(Debug, Clone)]
pub enum AnyDomain {
    Nuclear(NuclearDomain),
    Grid(GridBenchmark),
    Tiny(TinyOracleDomain),
}

impl AnyDomain {
    pub fn kind(&self) -> DomainKind {
        match self {
            AnyDomain::Nuclear(_) => DomainKind::Nuclear,
            AnyDomain::Grid(_) => DomainKind::Grid,
            AnyDomain::Tiny(_) => DomainKind::Tiny,
        }
    }
}

/// Evaluates `$body` with `$d` bound to the concrete domain.
#[macro_export]
macro_rules! with_domain {
    ($any:expr, $d:ident => $body:expr) => {
        match $any {
            $crate::harness::AnyDomain::Nuclear($d) => $body,
            $crate::harness::AnyDomain::Grid($d) => $body,
            $crate::harness::AnyDomain::Tiny($d) => $body,
        }
    };
}

impl DomainFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: DomainFile = toml::from_str(text)?;
        check_version(file.version)?;
        let sections = [file.nuclear.is_some(), file.grid.is_some(), file.tiny.is_some()];
        if sections.iter().filter(|s| **s).count() > 1 {
            return Err(Error::Config("domain file has more than one parameter section".into()));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read domain file {}: {e}", path.display())))?;
        DomainFile::parse(&text)
    }

    pub fn build(&self) -> Result<AnyDomain> {
        let mismatch = || Error::Config(format!("parameter section does not match kind {:?}", self.kind));
        Ok(match self.kind {
            DomainKind::Nuclear => {
                if self.grid.is_some() || self.tiny.is_some() {
                    return Err(mismatch());
                }
                AnyDomain::Nuclear(NuclearDomain::new(self.nuclear.clone().unwrap_or_default())?)
            }
            DomainKind::Grid => {
                if self.nuclear.is_some() || self.tiny.is_some() {
                    return Err(mismatch());
                }
                AnyDomain::Grid(GridBenchmark::new(self.grid.clone().unwrap_or_default())?)
            }
            DomainKind::Tiny => {
                if self.nuclear.is_some() || self.grid.is_some() {
                    return Err(mismatch());
                }
                AnyDomain::Tiny(TinyOracleDomain::new(self.tiny.clone().unwrap_or_default())?)
            }
        })
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema version {version} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gdice,
    Epscko,
}

/// One entry of an acceleration comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub label: String,
    pub alpha: f64,
    #[serde(default)]
    pub acceleration: AccelerationScheme,
}

impl SchemeSpec {
    /// The five schemes of the standard comparison.
    pub fn standard() -> Vec<SchemeSpec> {
        vec![
            SchemeSpec {
                label: "baseline-0.15".into(),
                alpha: 0.15,
                acceleration: AccelerationScheme::None,
            },
            SchemeSpec {
                label: "baseline-0.5".into(),
                alpha: 0.5,
                acceleration: AccelerationScheme::None,
            },
            SchemeSpec {
                label: "dynamic-smoothing".into(),
                alpha: 0.5,
                acceleration: AccelerationScheme::DynamicSmoothing {
                    alpha0: 0.5,
                    beta: 15.0,
                },
            },
            SchemeSpec {
                label: "noise-injection".into(),
                alpha: 0.5,
                acceleration: AccelerationScheme::NoiseInjection {
                    omega_max: 0.02,
                    rate: 1.0 / 2000.0,
                },
            },
            SchemeSpec {
                label: "entropy-injection".into(),
                alpha: 0.5,
                acceleration: AccelerationScheme::MaxEntropyInjection {
                    alpha_ei: 0.03,
                    tau_h: 0.1,
                },
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Observation bins per dimension for the discrete solver.
    pub factors: Vec<usize>,
    pub schemes: Vec<SchemeSpec>,
    /// Also run the continuous-observation solver.
    pub continuous: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            factors: (2..=10).collect(),
            schemes: SchemeSpec::standard(),
            continuous: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Rollouts used to value each returned policy.
    pub n_traj: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { n_traj: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Record wall-clock times; otherwise the column is 0 so outputs are
    /// reproducible byte for byte.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Path to the domain file, relative to this file.
    pub domain: PathBuf,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub gdice: GdiceConfig,
    #[serde(default)]
    pub epscko: EpsckoConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_solver() -> SolverKind {
    SolverKind::Gdice
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

/// An experiment config together with its resolved domain.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub domain: AnyDomain,
    pub domain_path: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        check_version(cfg.version)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.sweep.factors.is_empty() || self.sweep.schemes.is_empty() {
            return Err(Error::Config("sweep lists must be nonempty".into()));
        }
        if self.evaluation.n_traj == 0 {
            return Err(Error::Config("evaluation.n_traj must be at least 1".into()));
        }
        self.gdice.validate()?;
        self.epscko.validate()?;
        for s in &self.sweep.schemes {
            GdiceConfig {
                alpha: s.alpha,
                acceleration: s.acceleration,
                ..self.gdice.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

impl Experiment {
    /// Reads an experiment file and the domain file it references.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config = ExperimentConfig::parse(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let domain_path = base.join(&config.domain);
        let domain = DomainFile::load(&domain_path)?.build()?;
        Ok(Experiment {
            config,
            domain,
            domain_path,
        })
    }
}
