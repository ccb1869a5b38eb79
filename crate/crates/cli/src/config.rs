//! Run configuration file: TOML with a top-level `seed` and one level of
//! sections. Every key is optional; command-line flags take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::invalid;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: PathsSection,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub audio_dir: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub feature_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub set: Option<String>,
    pub sample_rate: Option<u32>,
    pub n_fft: Option<usize>,
    pub hop: Option<usize>,
    pub n_mels: Option<usize>,
    pub mel_frames: Option<usize>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub aggregator: Option<String>,
    pub hidden: Option<Vec<usize>>,
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub optimizer: Option<String>,
    pub learning_rate: Option<f64>,
    pub patience: Option<usize>,
    pub label_policy: Option<String>,
    pub class_reweighting: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub mode: Option<String>,
    pub subsets: Option<Vec<usize>>,
    pub ks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub genres: Option<usize>,
    pub zipf: Option<f64>,
    pub head_count: Option<usize>,
    pub bag_size_min: Option<usize>,
    pub bag_size_max: Option<usize>,
    pub dim: Option<usize>,
    pub separation: Option<f64>,
    pub noise_rate: Option<f64>,
    pub val_bags: Option<usize>,
    pub test_bags: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Flag value, else config value; missing is a validation error naming the flag.
pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(config).ok_or_else(|| invalid(format!("missing --{name} (or its config key)")))
}

pub fn existing(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(invalid(format!("{what} {} does not exist", path.display())))
    }
}

pub fn parse_named<T: std::str::FromStr<Err = String>>(value: &str) -> anyhow::Result<T> {
    value.parse().map_err(invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_unknown_keys_fail() {
        let cfg: RunConfig = toml::from_str(
            "seed = 3\n[model]\naggregator = \"mean\"\nhidden = [8, 4]\n[eval]\nks = [2]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.model.hidden, Some(vec![8, 4]));
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn flags_win_over_config() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
