use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use confbin::am::TrainConfig;
use confbin::corpus::{GeneratorConfig, SplitRatios};
use confbin::decoder::DecodeConfig;
use confbin::protocols::{AlConfig, BinSpec, LmConfig, ProtocolConfig, SslConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Seed,
    Topline,
    Noniter,
    Iter,
    Active,
    Random,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Protocol::Seed => "seed",
            Protocol::Topline => "topline",
            Protocol::Noniter => "noniter",
            Protocol::Iter => "iter",
            Protocol::Active => "active",
            Protocol::Random => "random",
        };
        f.write_str(s)
    }
}

/// One experiment, end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Protocol used by `run` when `--protocol` is not given.
    pub protocol: Protocol,
    /// Output directory used when `--out` is not given.
    pub out_dir: String,
    pub generator: GeneratorConfig,
    pub ratios: SplitRatios,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub lm: LmConfig,
    pub bins: BinSpec,
    pub ssl: SslConfig,
    pub al: AlConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            protocol: Protocol::Noniter,
            out_dir: "out".into(),
            generator: GeneratorConfig::default(),
            ratios: SplitRatios::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            lm: LmConfig::default(),
            bins: BinSpec::default(),
            ssl: SslConfig::default(),
            al: AlConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 25:65:10 split.
    Default,
    /// 2.5:87.5:10 split, as in the active-learning experiments.
    LowResource,
    /// 5:85:10 split.
    SmallSeed,
    /// A tiny seed set on noisy data, where adding pseudo-labels can hurt.
    Divergent,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let mut cfg = Self::default();
        match p {
            Preset::Default => {}
            Preset::LowResource => cfg.ratios = SplitRatios::new(2.5, 87.5, 10.0),
            Preset::SmallSeed => cfg.ratios = SplitRatios::new(5.0, 85.0, 10.0),
            Preset::Divergent => {
                cfg.ratios = SplitRatios::new(2.5, 87.5, 10.0);
                cfg.generator.noise_rate = 0.6;
                cfg.train.dev_fraction = 0.2;
            }
        }
        cfg
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            master_seed: self.master_seed,
            ..self.generator.clone()
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            train: self.train.clone(),
            decode: self.decode.clone(),
            lm: self.lm.clone(),
            bins: self.bins.clone(),
            ssl: self.ssl.clone(),
            al: self.al.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.generator().validate()?;
        self.ratios.validate()?;
        self.protocol_config().validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
