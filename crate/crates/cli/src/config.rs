//! The run configuration: one TOML file with a section per pipeline stage.
//! Every section is optional and falls back to its defaults; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dance_core::audio::MfccConfig;
use dance_core::metrics::{ClassifierConfig, DiversityConfig, EvaluationOptions, JointLimitTable};
use dance_core::model::{TrainConfig, TsmtConfig};
use dance_core::motion::{SegmentOptions, DEFAULT_HP_LAMBDA};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "DANCE_CONFIG";

/// File name of the effective config echoed into output directories.
pub const ECHO_NAME: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Raw corpus: `poses/`, `audio/`, `beats/` and an optional `labels.json`.
    pub dataset: PathBuf,
    /// Preprocessed corpus with the segment manifest.
    pub processed: PathBuf,
    pub checkpoints: PathBuf,
    pub outputs: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/raw".into(),
            processed: "data/processed".into(),
            checkpoints: "runs/checkpoints".into(),
            outputs: "runs/outputs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub hp_lambda: f64,
    /// Canonical pose frame rate after resampling.
    pub fps: f64,
    pub segment: SegmentOptions,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            hp_lambda: DEFAULT_HP_LAMBDA,
            fps: 24.0,
            segment: SegmentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub beat_tolerance: usize,
    pub diversity: DiversityConfig,
    pub limits: JointLimitTable,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            beat_tolerance: EvaluationOptions::default().beat_tolerance,
            diversity: DiversityConfig::default(),
            limits: JointLimitTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Standardize audio features with training-split statistics.
    pub standardize_audio: bool,
    pub paths: Paths,
    pub preprocess: PreprocessConfig,
    pub audio: MfccConfig,
    pub model: TsmtConfig,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
    pub classifier: ClassifierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            standardize_audio: true,
            paths: Paths::default(),
            preprocess: PreprocessConfig::default(),
            audio: MfccConfig::default(),
            model: TsmtConfig::default(),
            train: TrainConfig::default(),
            metrics: MetricsConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Loads `path`, or the file named by [`CONFIG_ENV`], or the defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.classifier.validate()?;
        self.metrics.limits.validate()?;
        if !(self.preprocess.fps > 0.0) {
            bail!("preprocess.fps must be positive");
        }
        if self.preprocess.fps != self.audio.fps {
            bail!(
                "preprocess.fps ({}) and audio.fps ({}) must agree",
                self.preprocess.fps,
                self.audio.fps
            );
        }
        if !(self.preprocess.hp_lambda >= 0.0) {
            bail!("preprocess.hp_lambda must be non-negative");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn evaluation_options(&self) -> EvaluationOptions {
        EvaluationOptions {
            beat_tolerance: self.metrics.beat_tolerance,
            diversity: self.metrics.diversity.clone(),
            seed: self.seed,
        }
    }

    /// Writes the effective config into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        dance_core::fsutil::write_atomic(&dir.join(ECHO_NAME), self.to_toml()?.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n[train]\nepochs = 5\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.model, TsmtConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("[train]\nepoch = 5\n").unwrap_err();
        assert!(format!("{err:#}").contains("epoch"), "{err:#}");
    }

    #[test]
    fn mismatched_rates_rejected() {
        assert!(RunConfig::from_toml("[audio]\nfps = 30.0\n").is_err());
    }
}
