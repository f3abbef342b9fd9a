//! Optional TOML config file. Precedence everywhere: command-line flag,
//! then config-file value, then the built-in default. Unknown keys are
//! rejected.

use std::path::Path;

use serde::Deserialize;

use crate::errors::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // data preparation
    pub max_tokens: Option<usize>,
    pub bpe_merges: Option<usize>,
    pub vocab_size: Option<usize>,
    // corruption
    pub rate_mean: Option<f64>,
    pub rate_variance: Option<f64>,
    pub clamp_low: Option<f64>,
    pub clamp_high: Option<f64>,
    pub threshold: Option<u64>,
    pub counts_from: Option<String>,
    pub no_shuffle: Option<bool>,
    pub no_freq_filter: Option<bool>,
    // model
    pub hidden: Option<usize>,
    pub embed: Option<usize>,
    pub attn_hidden: Option<usize>,
    pub out_hidden: Option<usize>,
    pub tie_embeddings: Option<bool>,
    // training
    pub mode: Option<String>,
    pub epochs: Option<u32>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_halving_start: Option<u32>,
    pub lr_halving_period: Option<u32>,
    pub grad_clip: Option<f64>,
    pub ood_cap: Option<usize>,
    pub jobs: Option<usize>,
    // decoding
    pub beam_size: Option<usize>,
    pub max_len: Option<usize>,
    pub length_normalization: Option<bool>,
    pub boolean_no: Option<String>,
    // shared
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

/// Flag value, else config-file value, else default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for settings without a built-in default.
pub fn pick_opt<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}
