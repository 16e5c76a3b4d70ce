//! The JSON experiment document. One file fully determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symclt::bounds::Constants;
use symclt::report::ThetaSpec;
use symclt::samplers::DistributionKind;

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this document is written for; checked against the one invoked.
    #[serde(default)]
    pub command: Option<String>,
    pub distributions: Vec<DistributionKind>,
    pub dims: Dims,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<ThetaSpec>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub ank: Option<AnkConfig>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseConfig>,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Either an explicit list or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dims {
    List(Vec<usize>),
    Range { from: usize, to: usize },
}

impl Dims {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Dims::List(v) => v.clone(),
            Dims::Range { from, to } => (*from..=*to).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnkConfig {
    pub k: usize,
    pub n_subspaces: usize,
    #[serde(default = "one")]
    pub n_dirs: usize,
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    Standard,
    SimplexEdges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnoseConfig {
    Reflection { frame: FrameChoice },
    Rotation { eps: Vec<f64> },
    /// Entry moments of Haar rotations, `samples` draws per dimension.
    Haar,
    /// Tightness residuals of the standard and simplex-edge frames.
    Frames,
}

fn default_thetas() -> Vec<ThetaSpec> {
    vec![ThetaSpec::E1]
}

fn default_delta() -> f64 {
    symclt::empirical::DEFAULT_DELTA
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    /// Checks shared by every command.
    pub fn validate(&self, command: &str) -> Result<(), Failure> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(Failure::config(format!(
                    "config is for `{c}` but `{command}` was invoked"
                )));
            }
        }
        if self.distributions.is_empty() {
            return Err(Failure::config("`distributions` is empty"));
        }
        if self.dims.values().is_empty() {
            return Err(Failure::config("`dims` is empty"));
        }
        if self.samples == 0 {
            return Err(Failure::config("`samples` must be positive"));
        }
        if self.thetas.is_empty() {
            return Err(Failure::config("`thetas` is empty"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Failure::config(format!("`delta` must lie in (0,1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }
}
