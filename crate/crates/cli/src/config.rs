//! Run configuration read from a TOML file with one section per stage.

use std::path::Path;

use anyhow::{bail, Context, Result};
use iqp_core::controller::InitSpread;
use iqp_core::trainer::TrainConfig;
use iqp_core::Init;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub base: BaseConfig,
    pub controller: SpreadConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Zeros,
    Normal,
    Uniform,
    OrderScaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseConfig {
    pub max_order: usize,
    pub init: InitKind,
    pub init_mean: f64,
    pub init_std: f64,
    pub init_low: f64,
    pub init_high: f64,
    /// Exponent of the order in `order_scaled` initialization.
    pub init_decay: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            max_order: 6,
            init: InitKind::Normal,
            init_mean: 0.0,
            init_std: 0.01,
            init_low: -0.01,
            init_high: 0.01,
            init_decay: 1.0,
        }
    }
}

impl BaseConfig {
    pub fn init(&self) -> Init {
        match self.init {
            InitKind::Zeros => Init::Zeros,
            InitKind::Normal => Init::Normal { mean: self.init_mean, std: self.init_std },
            InitKind::Uniform => Init::Uniform { low: self.init_low, high: self.init_high },
            InitKind::OrderScaled => Init::OrderScaled { std: self.init_std, decay: self.init_decay },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadConfig {
    pub center: f64,
    pub weight_std: f64,
    pub noise_std: f64,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        let s = InitSpread::default();
        SpreadConfig { center: s.center, weight_std: s.weight_std, noise_std: s.noise_std }
    }
}

impl SpreadConfig {
    pub fn spread(&self) -> InitSpread {
        InitSpread { center: self.center, weight_std: self.weight_std, noise_std: self.noise_std }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?
            }
        };
        cfg.train.validate()?;
        if cfg.base.max_order == 0 {
            bail!("base.max_order must be at least 1");
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let cfg: RunConfig = toml::from_str("[train]\nlearning_rate = 0.05\n[base]\nmax_order = 3\n").unwrap();
        assert_eq!(cfg.train.learning_rate, 0.05);
        assert_eq!(cfg.train.max_iters, TrainConfig::default().max_iters);
        assert_eq!(cfg.base.max_order, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nlr = 0.05\n").is_err());
        assert!(toml::from_str::<RunConfig>("[optimizer]\n").is_err());
    }
}
