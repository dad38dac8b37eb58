//! Pipeline config: one TOML file per run.
//!
//! ```toml
//! [dataset]
//! format = "synthetic"      # synthetic | nmnist | csv
//! width = 16
//! height = 16
//! classes = 3
//! t_max_norm = 1.0
//! # nmnist / csv only; relative paths resolve against the config file
//! # train_dir = "data/Train"
//! # test_dir = "data/Test"
//! # max_train_per_class = 0  # 0 keeps every file
//! # max_test_per_class = 0
//!
//! [dataset.synthetic]
//! per_class = 60
//! test_per_class = 30
//! line_us = 2000.0
//! noise_rate = 400.0
//! train_seed = 1
//! test_seed = 2
//!
//! [sste]        # encoder parameters
//! [network]     # conv = [{ channels = 8, kernel = 5, stride = 2 }], init_seed
//! [train]       # optimiser and schedule
//! [eval]        # thetas, snrs, seeds, [eval.mixture]
//! ```
//!
//! Every section and key is optional; missing keys take the defaults below.

use std::path::{Path, PathBuf};

use eventf2s::dataset::ToySpec;
use eventf2s::evaluation::MixtureSpec;
use eventf2s::{F2sNetwork, SsteConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Synthetic,
    Nmnist,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub per_class: usize,
    pub test_per_class: usize,
    pub line_us: f64,
    pub noise_rate: f64,
    pub train_seed: u64,
    pub test_seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let toy = ToySpec::default();
        SyntheticSection {
            per_class: toy.per_class,
            test_per_class: toy.per_class / 2,
            line_us: toy.line_us,
            noise_rate: toy.noise_rate,
            train_seed: 1,
            test_seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub format: DataFormat,
    pub width: u16,
    pub height: u16,
    pub classes: usize,
    pub t_max_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dir: Option<PathBuf>,
    pub max_train_per_class: usize,
    pub max_test_per_class: usize,
    pub synthetic: SyntheticSection,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            format: DataFormat::Synthetic,
            width: 16,
            height: 16,
            classes: 3,
            t_max_norm: 1.0,
            train_dir: None,
            test_dir: None,
            max_train_per_class: 0,
            max_test_per_class: 0,
            synthetic: SyntheticSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSection {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Convolution layers in order; a dense classifier always follows.
    pub conv: Vec<ConvSection>,
    pub init_seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { conv: vec![ConvSection { channels: 8, kernel: 5, stride: 2 }], init_seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub thetas: Vec<f64>,
    pub snrs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mixture: MixtureSpec,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            thetas: vec![1.0, 1.5, 2.0, 2.5, 3.0],
            snrs: vec![0.9, 0.97, 0.98],
            seeds: vec![0],
            mixture: MixtureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetSection,
    pub sste: SsteConfig,
    pub network: NetworkSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl PipelineConfig {
    /// Parses, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut cfg.dataset.train_dir, &mut cfg.dataset.test_dir].into_iter().flatten() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.train.rng_seed = seed;
        self.network.init_seed = seed;
        self.eval.seeds = vec![seed];
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.width == 0 || d.height == 0 {
            return Err(CliError::Config("dataset width and height must be positive".into()));
        }
        if d.classes < 2 {
            return Err(CliError::Config("dataset.classes must be >= 2".into()));
        }
        if !(d.t_max_norm > 0.0 && d.t_max_norm.is_finite()) {
            return Err(CliError::Config("dataset.t_max_norm must be > 0".into()));
        }
        match d.format {
            DataFormat::Synthetic => {
                if d.classes != eventf2s::dataset::TOY_CLASSES.len() {
                    return Err(CliError::Config(format!(
                        "the synthetic dataset has {} classes",
                        eventf2s::dataset::TOY_CLASSES.len()
                    )));
                }
                if d.synthetic.per_class == 0 {
                    return Err(CliError::Config("dataset.synthetic.per_class must be >= 1".into()));
                }
            }
            DataFormat::Nmnist | DataFormat::Csv => {
                let train = d.train_dir.as_ref().ok_or_else(|| CliError::Config("dataset.train_dir is required".into()))?;
                for dir in std::iter::once(train).chain(d.test_dir.as_ref()) {
                    if !dir.is_dir() {
                        return Err(CliError::Config(format!("dataset directory {} does not exist", dir.display())));
                    }
                }
            }
        }
        self.sste.validate().map_err(|e| CliError::Config(format!("sste: {e}")))?;
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        self.build_network()?;
        let e = &self.eval;
        if e.thetas.is_empty() || !e.thetas.windows(2).all(|w| w[0] < w[1]) || e.thetas.iter().any(|t| !(*t > 0.0)) {
            return Err(CliError::Config("eval.thetas must be a non-empty, strictly ascending list of positive values".into()));
        }
        if e.snrs.is_empty() || e.snrs.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(CliError::Config("eval.snrs must be a non-empty list of values in (0, 1]".into()));
        }
        if e.seeds.is_empty() {
            return Err(CliError::Config("eval.seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Uninitialised network for this config; rejects impossible layer
    /// shapes.
    pub fn build_network(&self) -> Result<F2sNetwork> {
        let convs: Vec<_> = self.network.conv.iter().map(|c| (c.channels, c.kernel, c.stride)).collect();
        let input = (1, self.dataset.height as usize, self.dataset.width as usize);
        F2sNetwork::conv_stack(input, &convs, self.dataset.classes)
            .map_err(|e| CliError::Config(format!("network: {e}")))
    }

    pub fn toy_spec(&self, per_class: usize) -> ToySpec {
        let s = &self.dataset.synthetic;
        ToySpec {
            width: self.dataset.width,
            height: self.dataset.height,
            per_class,
            line_us: s.line_us,
            noise_rate: s.noise_rate,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }
}
