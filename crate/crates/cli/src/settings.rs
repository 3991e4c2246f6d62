//! Option resolution: command-line flags, then the `--config` TOML file,
//! then built-in defaults.
//!
//! Config keys are the training config field names plus `max_len`,
//! `include_punct`, `macro_uuas` and `punctuation` (a list of POS tags):
//!
//! ```toml
//! geometry = "poincare"
//! rank = 16
//! max_epochs = 40
//! punctuation = ["PUNCT", ".", ","]
//! ```

use crate::args::TrainFlags;
use crate::error::{CliError, Result};
use hyperprobe::data::{PunctuationSet, DEFAULT_MAX_LEN};
use hyperprobe::probes::{Activation, Geometry, Task};
use hyperprobe::train::TrainConfig;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub task: Option<Task>,
    pub geometry: Option<Geometry>,
    pub rank: Option<usize>,
    pub curvature: Option<f64>,
    pub lr: Option<f64>,
    pub max_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub decay_factor: Option<f64>,
    pub patience: Option<usize>,
    pub use_q: Option<bool>,
    pub nonlinearity: Option<Activation>,
    pub trainable_heads: Option<bool>,
    pub max_len: Option<usize>,
    pub include_punct: Option<bool>,
    pub macro_uuas: Option<bool>,
    pub punctuation: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn max_len(&self, flag: Option<usize>) -> usize {
        flag.or(self.max_len).unwrap_or(DEFAULT_MAX_LEN)
    }

    pub fn include_punct(&self, flag: bool) -> bool {
        flag || self.include_punct.unwrap_or(false)
    }

    pub fn macro_uuas(&self, flag: bool) -> bool {
        flag || self.macro_uuas.unwrap_or(false)
    }

    pub fn punctuation(&self) -> PunctuationSet {
        match &self.punctuation {
            Some(tags) => PunctuationSet::new(tags),
            None => PunctuationSet::default(),
        }
    }

    /// Training config for `task` (or the file's task, or distance).
    /// Boolean flags can only switch a setting on.
    pub fn train_config(&self, flags: &TrainFlags, task: Option<Task>, fixed_heads: bool) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            task: task.or(self.task).unwrap_or(d.task),
            geometry: flags.geometry.or(self.geometry).unwrap_or(d.geometry),
            rank: flags.rank.or(self.rank).unwrap_or(d.rank),
            curvature: flags.curvature.or(self.curvature).unwrap_or(d.curvature),
            lr: flags.lr.or(self.lr).unwrap_or(d.lr),
            max_epochs: flags.epochs.or(self.max_epochs).unwrap_or(d.max_epochs),
            batch_size: flags.batch.or(self.batch_size).unwrap_or(d.batch_size),
            seed: flags.seed.or(self.seed).unwrap_or(d.seed),
            decay_factor: flags.decay.or(self.decay_factor).unwrap_or(d.decay_factor),
            patience: flags.patience.or(self.patience).unwrap_or(d.patience),
            use_q: flags.use_q || self.use_q.unwrap_or(d.use_q),
            nonlinearity: flags.nonlinearity.or(self.nonlinearity),
            trainable_heads: !fixed_heads && self.trainable_heads.unwrap_or(d.trainable_heads),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
