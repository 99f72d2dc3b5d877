use std::path::{Path, PathBuf};

use concentration::features::FeatureWindowConfig;
use concentration::kalman::KalmanParams;
use concentration::mixture_fit::FitOptions;
use concentration::mlp::TrainConfig;
use concentration::synth::{derive_seed, SynthConfig};
use serde::{Deserialize, Serialize};

/// All stage settings. Stage seeds are always derived from the master
/// `seed`, so a seed written inside a stage section has no effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub traces_per_class: usize,
    /// Bins per axis of the 2D keypoint histogram.
    pub keypoint_histogram_bins: usize,
    pub features: FeatureWindowConfig,
    pub train: TrainConfig,
    pub kalman: KalmanParams,
    pub fit: FitOptions,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: None,
            traces_per_class: 200,
            keypoint_histogram_bins: 50,
            features: FeatureWindowConfig::default(),
            train: TrainConfig::default(),
            kalman: KalmanParams::default(),
            fit: FitOptions::default(),
            synth: SynthConfig::default(),
        }
    }
}

const TRAIN_STREAM: u64 = 1;
const SYNTH_STREAM: u64 = 2;

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
            }
        }
    }

    /// Applies the master seed to every stage.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = derive_seed(self.seed, TRAIN_STREAM);
        self.synth.seed = derive_seed(self.seed, SYNTH_STREAM);
        self
    }

    pub fn validate(&self) -> concentration::Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        self.kalman.validate()?;
        self.fit.validate()?;
        self.synth.validate()?;
        if self.keypoint_histogram_bins == 0 {
            return Err(concentration::Error::Config(
                "keypoint_histogram_bins must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>("sed = 3").is_err());
        assert!(toml::from_str::<PipelineConfig>("[kalman]\nrr = 0.2").is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg: PipelineConfig = toml::from_str("seed = 9\n[kalman]\nr = 0.2\n").unwrap();
        assert_eq!(cfg.kalman.r, 0.2);
        assert_eq!(cfg.kalman.p0, 0.9);
        assert_eq!(cfg.train.learning_rate, 0.001);
    }

    #[test]
    fn master_seed_drives_stages() {
        let a = PipelineConfig::default().with_seed(Some(5));
        let b = PipelineConfig::default().with_seed(Some(6));
        assert_ne!(a.train.seed, b.train.seed);
        assert_ne!(a.train.seed, a.synth.seed);
        assert_eq!(a, PipelineConfig::default().with_seed(Some(5)));
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<PipelineConfig>(&text).unwrap(), cfg);
    }
}
