//! TOML run configurations. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use sepcore::generators::{Construction, Distribution, SeparablePreset};
use sepcore::montecarlo::{McConfig, Reference};
use sepcore::{FlipFlopConfig, RootKind, Shape, StatKind};

use crate::error::{CliError, CliResult};

fn default_reps() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bins() -> usize {
    40
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
}

/// One `(p1, p2, n)` setting.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
}

impl Case {
    pub fn shape(&self) -> CliResult<Shape> {
        Ok(Shape::new(self.p1, self.p2)?)
    }
}

/// Sampling and decision settings shared by the simulation commands.
#[derive(Debug, Clone)]
pub struct Sampling {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub dist: Distribution,
    pub centered: bool,
    pub root: RootKind,
}

impl Sampling {
    pub fn mc_config(&self, case: &Case, stats: &[StatKind]) -> CliResult<McConfig> {
        let cfg = McConfig {
            reps: self.reps,
            n: case.n,
            shape: case.shape()?,
            dist: self.dist,
            centered: self.centered,
            alpha: self.alpha,
            master_seed: self.seed,
            root_kind: self.root,
            stats: stats.to_vec(),
            flip_flop: FlipFlopConfig::default(),
            nuisance: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

macro_rules! sampling_of {
    ($c:expr) => {
        Sampling {
            reps: $c.reps,
            alpha: $c.alpha,
            seed: $c.seed,
            dist: $c.dist,
            centered: $c.centered,
            root: $c.root,
        }
    };
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(default)]
    pub centered: bool,
    #[serde(default)]
    pub root: RootKind,
    pub stats: Vec<StatKind>,
    pub cases: Vec<Case>,
    pub out: Option<PathBuf>,
}

impl CalibrateConfig {
    pub fn sampling(&self) -> Sampling {
        sampling_of!(self)
    }
}

/// Population core of a power study before shrinkage.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoreSpec {
    /// Random core with a named spectrum.
    Preset {
        name: String,
        #[serde(default)]
        seed: u64,
    },
    /// Random rank-`rank` partial-isotropy core.
    PartialIsotropy {
        construction: Construction,
        rank: usize,
        lambda: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    /// Replicates per power estimate.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Replicates of the null calibration; defaults to `reps`.
    pub calibration_reps: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(default)]
    pub centered: bool,
    #[serde(default)]
    pub root: RootKind,
    pub stats: Vec<StatKind>,
    pub core: CoreSpec,
    /// Shrinkage weights `w` of `w C + (1 - w) I`.
    pub w: Vec<f64>,
    pub cases: Vec<Case>,
    pub out: Option<PathBuf>,
}

impl PowerConfig {
    pub fn sampling(&self) -> Sampling {
        sampling_of!(self)
    }
}

/// Separable nuisance `K` for null simulations.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuisanceSpec {
    pub preset: SeparablePreset,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullDistConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(default)]
    pub centered: bool,
    #[serde(default)]
    pub root: RootKind,
    pub stats: Vec<StatKind>,
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    pub nuisance: Option<NuisanceSpec>,
    /// Reference laws for empirical size; `t1a` and `t1b` default to TW1.
    #[serde(default)]
    pub references: BTreeMap<StatKind, Reference>,
    pub samples_out: Option<PathBuf>,
    pub summary_out: Option<PathBuf>,
}

impl NullDistConfig {
    pub fn sampling(&self) -> Sampling {
        sampling_of!(self)
    }

    pub fn case(&self) -> Case {
        Case {
            p1: self.p1,
            p2: self.p2,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsdSpec {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    #[serde(default = "default_esd_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_esd_reps() -> usize {
    5
}

fn default_study_reps() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbpSpec {
    pub construction: Construction,
    pub c: Vec<f64>,
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    #[serde(default = "default_study_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T3Spec {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    #[serde(default = "default_study_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Separable covariances under which `T3` is contrasted with its
    /// non-invariant analogue.
    #[serde(default)]
    pub nuisance: Vec<SeparablePreset>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub esd: Option<EsdSpec>,
    pub bbp: Option<BbpSpec>,
    pub t3: Option<T3Spec>,
    pub out: Option<PathBuf>,
}
