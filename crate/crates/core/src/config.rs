//! Run configuration loaded from a TOML file with one section per stage.
//!
//! ```toml
//! [run]
//! seed = 7
//!
//! [skipgram]
//! dim = 32
//!
//! [train]
//! epochs = 10
//!
//! [train.reward]
//! kappa = 1.0
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected. A run seed,
//! when present, replaces every stage seed with one derived from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crime::{DEFAULT_BANDWIDTH_MILES, DEFAULT_CELL_DEGREES};
use crate::embed::{SkipGramConfig, WalkConfig};
use crate::error::{io_err, Error, Result};
use crate::eval::ExperimentConfig;
use crate::exec::derive_seed;
use crate::policy::PolicyConfig;
use crate::routing::BeamConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
}

/// Default input and output locations; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub crimes: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrimeSection {
    /// Categories to keep (case-insensitive); empty keeps all.
    pub categories: Vec<String>,
    pub bandwidth: f64,
    pub cell_degrees: f64,
}

impl Default for CrimeSection {
    fn default() -> Self {
        CrimeSection {
            categories: vec!["shooting".into(), "assault".into(), "robbery".into()],
            bandwidth: DEFAULT_BANDWIDTH_MILES,
            cell_degrees: DEFAULT_CELL_DEGREES,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub paths: PathsSection,
    pub crime: CrimeSection,
    pub walks: WalkConfig,
    pub skipgram: SkipGramConfig,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub beam: BeamConfig,
    pub evaluation: ExperimentConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.finish()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets the run seed and re-derives every stage seed from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.run.seed = Some(seed);
        self.walks.seed = derive_seed(seed, &[1]);
        self.skipgram.seed = derive_seed(seed, &[2]);
        self.policy.seed = derive_seed(seed, &[3]);
        self.train.seed = derive_seed(seed, &[4]);
        for (i, s) in self.evaluation.seeds.iter_mut().enumerate() {
            *s = derive_seed(seed, &[5, i as u64]);
        }
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(seed) = self.run.seed {
            self.set_seed(seed);
        }
        self.evaluation.beam = self.beam.clone();
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.walks.validate()?;
        self.skipgram.validate()?;
        self.policy.validate()?;
        self.train.validate()?;
        self.beam.validate()?;
        self.evaluation.validate()?;
        let c = &self.crime;
        if !(c.bandwidth.is_finite() && c.bandwidth > 0.0 && c.cell_degrees.is_finite() && c.cell_degrees > 0.0) {
            return Err(Error::Config("crime bandwidth and cell size must be positive".into()));
        }
        Ok(())
    }

    /// Pretty TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.train.episodes_per_epoch, 2000);
        assert_eq!(cfg.train.epochs, 60);
        assert_eq!(cfg.train.rollouts, 5);
        assert_eq!(cfg.beam.beam_width, 5);
        assert_eq!(cfg.policy.hidden1, 512);
        assert_eq!(cfg.skipgram.dim, 64);
        assert_eq!(cfg.evaluation.hops, vec![5, 10]);
        assert_eq!(cfg.evaluation.seeds.len(), 3);
    }

    #[test]
    fn sections_override_and_unknown_keys_fail() {
        let cfg = RunConfig::from_toml("[skipgram]\ndim = 8\n[train.reward]\nkappa = 2.5\n[beam]\nbeam_width = 3\n").unwrap();
        assert_eq!(cfg.skipgram.dim, 8);
        assert_eq!(cfg.train.reward.kappa, 2.5);
        assert_eq!(cfg.evaluation.beam.beam_width, 3);
        assert!(RunConfig::from_toml("[skipgram]\ndims = 8\n").is_err());
        assert!(RunConfig::from_toml("[nope]\n").is_err());
        assert!(RunConfig::from_toml("[skipgram]\ndim = 1\n").is_err());
        assert!(RunConfig::from_toml("[train]\nmax_len = 2\n").is_err());
    }

    #[test]
    fn run_seed_drives_stage_seeds() {
        let a = RunConfig::from_toml("[run]\nseed = 4\n[walks]\nseed = 99\n").unwrap();
        let b = RunConfig::from_toml("[run]\nseed = 4\n").unwrap();
        assert_eq!(a, b);
        let mut c = RunConfig::from_toml("[run]\nseed = 4\n").unwrap();
        c.set_seed(5);
        assert_ne!(c.walks.seed, b.walks.seed);
        let round = RunConfig::from_toml(&b.to_toml()).unwrap();
        assert_eq!(round, b);
    }
}
