//! Pipeline configuration file (TOML).
//!
//! ```toml
//! [paths]
//! train = "train.csv"        # labeled pairs
//! test = "test.csv"          # pairs to score
//! glove = "glove.txt"        # word vectors
//! work_dir = "work"          # every stage output lands here
//! # stopwords = "stop.txt"   # optional, one word per line
//!
//! [embedding]
//! dim = 50                   # vector width in the GloVe file
//!
//! [augment]
//! seed = 0
//!
//! [model]
//! hidden = [250, 500, 250]   # per-direction GRU sizes, one per stacked layer
//! head = [1000, 1024]        # hidden dense sizes before the sigmoid unit
//! join = "full"              # "full" = [g1, g2, |g1-g2|, g1*g2]; "concat" = [g1, g2]
//! max_len = 40               # padded sentence length
//! freeze_embeddings = false
//!
//! [train]
//! seed = 0                   # initialisation, dev split, shuffling, dropout
//! batch_size = 32
//! epochs = 10
//! lr = 0.001
//! keep_prob = 0.8
//! clip_norm = 5.0
//! dev_fraction = 0.1
//!
//! [secondary]
//! kind = "rf"                # rf | ada | svm
//! split_seed = 0             # 90/10 train/dev split of the feature rows
//! dev_fraction = 0.1
//!
//! [secondary.forest]
//! n_trees = 100
//! max_depth = 8
//! features_per_split = 2
//! bootstrap = true
//! seed = 0
//!
//! [secondary.ada]
//! n_rounds = 100
//!
//! [secondary.svm]
//! lambda = 0.0001
//! epochs = 20
//! seed = 0
//! calibration_fraction = 0.2
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gru::{ModelConfig, TrainConfig};
use crate::secondary::{AdaParams, ClassifierKind, ClassifierParams, ForestParams, SvmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub glove: PathBuf,
    pub work_dir: PathBuf,
    pub stopwords: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            train: "train.csv".into(),
            test: "test.csv".into(),
            glove: "glove.txt".into(),
            work_dir: "work".into(),
            stopwords: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { dim: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondaryConfig {
    pub kind: ClassifierKind,
    pub split_seed: u64,
    pub dev_fraction: f64,
    pub forest: ForestParams,
    pub ada: AdaParams,
    pub svm: SvmParams,
}

impl SecondaryConfig {
    pub fn params(&self) -> ClassifierParams {
        ClassifierParams {
            forest: self.forest,
            ada: self.ada,
            svm: self.svm,
        }
    }
}

impl Default for SecondaryConfig {
    fn default() -> Self {
        SecondaryConfig {
            kind: ClassifierKind::Rf,
            split_seed: 0,
            dev_fraction: 0.1,
            forest: ForestParams::default(),
            ada: AdaParams::default(),
            svm: SvmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub embedding: EmbeddingConfig,
    pub augment: AugmentConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub secondary: SecondaryConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.embedding.dim == 0 {
            return Err(Error::Config("embedding.dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.secondary.dev_fraction) {
            return Err(Error::Config("secondary.dev_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

impl Paths {
    pub fn resolve_against(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train);
        fix(&mut self.test);
        fix(&mut self.glove);
        fix(&mut self.work_dir);
        if let Some(s) = self.stopwords.as_mut() {
            fix(s);
        }
    }
}
