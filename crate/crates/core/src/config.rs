//! Run configuration file (TOML). Every section is optional; unknown keys
//! are rejected. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{table_variants, ForestConfig, ImportanceOptions, ModelKind, ModelVariant};
use crate::nn::InputMode;
use crate::objectives::CausalSpec;
use crate::synth::SynthConfig;
use crate::training::{FinetuneStrategy, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSelection {
    /// Held-out sites for OOD experiments; empty means the first site.
    pub test_sites: Vec<String>,
    /// First seed; runs use `seed, seed + 1, ..`.
    pub seed: u64,
    pub n_seeds: usize,
    /// Model rows of the OOD table.
    pub models: Vec<ModelVariant>,
    /// Model rows of the domain-adaptation table.
    pub adapt_models: Vec<ModelVariant>,
    pub strategies: Vec<FinetuneStrategy>,
    pub whole_dataset_scaling: bool,
    pub importance: ImportanceOptions,
}

impl Default for ExperimentSelection {
    fn default() -> Self {
        ExperimentSelection {
            test_sites: Vec::new(),
            seed: 0,
            n_seeds: 1,
            models: table_variants(),
            adapt_models: vec![ModelVariant::new(ModelKind::CnnCacm, InputMode::SatelliteOnly)],
            strategies: FinetuneStrategy::ALL.to_vec(),
            whole_dataset_scaling: false,
            importance: ImportanceOptions::default(),
        }
    }
}

impl ExperimentSelection {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    /// Run name; the default output directory is `<run root>/<name>`.
    pub name: Option<String>,
    /// Dataset directory or manifest file.
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub forest: ForestConfig,
    /// Causal tags; when absent they are read from the dataset's
    /// `ground_truth.json`.
    pub causal: Option<CausalSpec>,
    pub experiment: ExperimentSelection,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.forest.validate()?;
        if self.experiment.n_seeds == 0 {
            return Err(Error::Config("experiment.n_seeds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfigFile::parse("bogus = 1").is_err());
        assert!(RunConfigFile::parse("[train]\nepochz = 3").is_err());
        assert!(RunConfigFile::parse("[experiment]\nn_seeds = 2\nfoo = true").is_err());
    }

    #[test]
    fn sections_and_round_trip() {
        let text = r#"
name = "r1"
data = "data"
[train]
epochs = 3
optimizer = { sgd_momentum = 0.9 }
[experiment]
seed = 7
n_seeds = 2
strategies = ["none", "closest"]
models = [{ kind = "cnn_cacm", input_mode = "satellite_only" }]
[causal]
variant = "b_caused_preferred"
[causal.tags]
a = "caused_by_y"
"#;
        let cfg = RunConfigFile::parse(text).unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.experiment.seeds(), vec![7, 8]);
        assert_eq!(cfg.experiment.models[0].kind, ModelKind::CnnCacm);
        let again = RunConfigFile::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn paths_relative_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("cfg");
        std::fs::create_dir(&sub).unwrap();
        let f = sub.join("run.toml");
        std::fs::write(&f, "data = \"../data\"\nout = \"/abs/out\"\n").unwrap();
        let cfg = RunConfigFile::load(&f).unwrap();
        assert_eq!(cfg.data.unwrap(), sub.join("../data"));
        assert_eq!(cfg.out.unwrap(), PathBuf::from("/abs/out"));
    }
}
