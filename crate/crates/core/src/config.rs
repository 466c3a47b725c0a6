//! Plain-text run configuration: `key = value` lines, `#` comments.
//! Unknown or repeated keys are errors; every key has a default, listed by
//! [`RunConfig::to_text`].

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Configuration;
use crate::nn::{OptimizerKind, TrainConfig};
use crate::renderer::DEFAULT_RASTER_SIZE;
use crate::solver::SearchConfig;
use crate::trainers::{default_ae_hidden, default_latent_dim, AeConfig, ImageArch, ImageTrainConfig, RuleTrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct StageParams {
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl StageParams {
    fn train_config(&self, optimizer: OptimizerKind, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            patience: self.patience,
            optimizer,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// 0 picks the per-configuration default.
    pub latent_dim: usize,
    /// 0 picks the per-configuration default.
    pub ae_hidden: usize,
    pub ae: StageParams,
    /// Training panels drawn for the autoencoder, one per problem.
    pub ae_panels: usize,
    pub rules: StageParams,
    pub rules_hidden: Vec<Vec<usize>>,
    pub rules_good_f1: f64,
    pub rules_class_floor: f64,
    pub rules_synth_budget: usize,
    pub rules_include_options: bool,
    /// Cap on training problems for the rule nets; 0 uses the whole shard.
    pub rules_problems: usize,
    pub img: StageParams,
    pub img_arch: Option<ImageArch>,
    pub img_panels: usize,
    pub conv_channels: Vec<usize>,
    pub raster_size: usize,
    pub tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            optimizer: OptimizerKind::Adam,
            latent_dim: 0,
            ae_hidden: 0,
            ae: StageParams {
                epochs: 60,
                patience: 6,
                learning_rate: 1e-3,
                batch_size: 64,
            },
            ae_panels: 6000,
            rules: StageParams {
                epochs: 40,
                patience: 4,
                learning_rate: 1e-3,
                batch_size: 64,
            },
            rules_hidden: vec![vec![64], vec![64, 64]],
            rules_good_f1: 0.99,
            rules_class_floor: 0.05,
            rules_synth_budget: 600,
            rules_include_options: true,
            rules_problems: 0,
            img: StageParams {
                epochs: 40,
                patience: 5,
                learning_rate: 1e-3,
                batch_size: 64,
            },
            img_arch: None,
            img_panels: 6000,
            conv_channels: vec![8, 16],
            raster_size: DEFAULT_RASTER_SIZE,
            tau: 0.5,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Format(format!("invalid value '{value}' for key '{key}'"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn show_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for generation and training"),
    ("optimizer", "adam or sgd"),
    (
        "latent_dim",
        "autoencoder latent width; 0 = per configuration (16/32/64/96)",
    ),
    (
        "ae_hidden",
        "autoencoder hidden width; 0 = per configuration (64/128/256)",
    ),
    ("ae_epochs", "autoencoder maximum epochs"),
    ("ae_patience", "autoencoder early-stopping patience"),
    ("ae_learning_rate", "autoencoder learning rate"),
    ("ae_batch_size", "autoencoder minibatch size"),
    ("ae_panels", "autoencoder training panels, one per training problem"),
    ("rules_epochs", "rule-net maximum epochs"),
    ("rules_patience", "rule-net early-stopping patience"),
    ("rules_learning_rate", "rule-net learning rate"),
    ("rules_batch_size", "rule-net minibatch size"),
    ("rules_hidden", "hidden-layer candidates, e.g. 64;64,64"),
    ("rules_good_f1", "validation F1 at which later candidates are skipped"),
    ("rules_class_floor", "minimum share of every class after oversampling"),
    (
        "rules_synth_budget",
        "extra generated problems per net for rare classes",
    ),
    ("rules_include_options", "also train on row 3 completed by each option"),
    ("rules_problems", "cap on training problems for rule nets; 0 = all"),
    ("img_epochs", "image encoder maximum epochs"),
    ("img_patience", "image encoder early-stopping patience"),
    ("img_learning_rate", "image encoder learning rate"),
    ("img_batch_size", "image encoder minibatch size"),
    ("img_arch", "auto, conv-lite or flattened-mlp"),
    ("img_panels", "image encoder training panels"),
    ("conv_channels", "conv-lite channels per stage"),
    ("raster_size", "rendered panel width and height in pixels"),
    ("tau", "acceptance threshold for binary rules, in (0, 1)"),
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = num(key, v)?,
            "optimizer" => self.optimizer = v.parse().map_err(|_| bad(key, v))?,
            "latent_dim" => self.latent_dim = num(key, v)?,
            "ae_hidden" => self.ae_hidden = num(key, v)?,
            "ae_epochs" => self.ae.epochs = num(key, v)?,
            "ae_patience" => self.ae.patience = num(key, v)?,
            "ae_learning_rate" => self.ae.learning_rate = num(key, v)?,
            "ae_batch_size" => self.ae.batch_size = num(key, v)?,
            "ae_panels" => self.ae_panels = num(key, v)?,
            "rules_epochs" => self.rules.epochs = num(key, v)?,
            "rules_patience" => self.rules.patience = num(key, v)?,
            "rules_learning_rate" => self.rules.learning_rate = num(key, v)?,
            "rules_batch_size" => self.rules.batch_size = num(key, v)?,
            "rules_hidden" => {
                self.rules_hidden = v.split(';').map(|o| list(key, o)).collect::<Result<_>>()?;
                if self.rules_hidden.is_empty() {
                    return Err(bad(key, v));
                }
            }
            "rules_good_f1" => self.rules_good_f1 = num(key, v)?,
            "rules_class_floor" => self.rules_class_floor = num(key, v)?,
            "rules_synth_budget" => self.rules_synth_budget = num(key, v)?,
            "rules_include_options" => self.rules_include_options = num(key, v)?,
            "rules_problems" => self.rules_problems = num(key, v)?,
            "img_epochs" => self.img.epochs = num(key, v)?,
            "img_patience" => self.img.patience = num(key, v)?,
            "img_learning_rate" => self.img.learning_rate = num(key, v)?,
            "img_batch_size" => self.img.batch_size = num(key, v)?,
            "img_arch" => {
                self.img_arch = match v {
                    "auto" => None,
                    _ => Some(v.parse().map_err(|_| bad(key, v))?),
                }
            }
            "img_panels" => self.img_panels = num(key, v)?,
            "conv_channels" => self.conv_channels = list(key, v)?,
            "raster_size" => {
                self.raster_size = num(key, v)?;
                if self.raster_size < 8 {
                    return Err(bad(key, v));
                }
            }
            "tau" => {
                let t: f64 = num(key, v)?;
                SearchConfig::new(t).map_err(|_| bad(key, v))?;
                self.tau = t;
            }
            _ => return Err(Error::Format(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Format(format!("line {}: key '{k}' repeated", n + 1)));
            }
            cfg.set(k, v)
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn value(&self, key: &str) -> String {
        match key {
            "seed" => self.seed.to_string(),
            "optimizer" => format!("{:?}", self.optimizer).to_lowercase(),
            "latent_dim" => self.latent_dim.to_string(),
            "ae_hidden" => self.ae_hidden.to_string(),
            "ae_epochs" => self.ae.epochs.to_string(),
            "ae_patience" => self.ae.patience.to_string(),
            "ae_learning_rate" => self.ae.learning_rate.to_string(),
            "ae_batch_size" => self.ae.batch_size.to_string(),
            "ae_panels" => self.ae_panels.to_string(),
            "rules_epochs" => self.rules.epochs.to_string(),
            "rules_patience" => self.rules.patience.to_string(),
            "rules_learning_rate" => self.rules.learning_rate.to_string(),
            "rules_batch_size" => self.rules.batch_size.to_string(),
            "rules_hidden" => self
                .rules_hidden
                .iter()
                .map(|h| show_list(h))
                .collect::<Vec<_>>()
                .join(";"),
            "rules_good_f1" => self.rules_good_f1.to_string(),
            "rules_class_floor" => self.rules_class_floor.to_string(),
            "rules_synth_budget" => self.rules_synth_budget.to_string(),
            "rules_include_options" => self.rules_include_options.to_string(),
            "rules_problems" => self.rules_problems.to_string(),
            "img_epochs" => self.img.epochs.to_string(),
            "img_patience" => self.img.patience.to_string(),
            "img_learning_rate" => self.img.learning_rate.to_string(),
            "img_batch_size" => self.img.batch_size.to_string(),
            "img_arch" => self.img_arch.map_or("auto".into(), |a| a.to_string()),
            "img_panels" => self.img_panels.to_string(),
            "conv_channels" => show_list(&self.conv_channels),
            "raster_size" => self.raster_size.to_string(),
            "tau" => self.tau.to_string(),
            _ => unreachable!("unlisted key {key}"),
        }
    }

    /// Every key with its current value and a comment; parses back to `self`.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, doc)| format!("# {doc}\n{k} = {}\n", self.value(k)))
            .collect()
    }

    pub fn ae_config(&self, config: Configuration) -> AeConfig {
        AeConfig {
            latent_dim: if self.latent_dim == 0 {
                default_latent_dim(config)
            } else {
                self.latent_dim
            },
            hidden: if self.ae_hidden == 0 {
                default_ae_hidden(config)
            } else {
                self.ae_hidden
            },
            train: self.ae.train_config(self.optimizer, self.seed),
        }
    }

    pub fn rule_config(&self) -> RuleTrainConfig {
        RuleTrainConfig {
            hidden_options: self.rules_hidden.clone(),
            good_enough_f1: self.rules_good_f1,
            class_floor: self.rules_class_floor,
            synth_budget: self.rules_synth_budget,
            include_options: self.rules_include_options,
            train: self.rules.train_config(self.optimizer, self.seed),
        }
    }

    pub fn image_config(&self) -> ImageTrainConfig {
        let mut c = ImageTrainConfig::for_size(self.raster_size);
        if let Some(a) = self.img_arch {
            c.arch = a;
        }
        c.conv_channels = self.conv_channels.clone();
        c.train = self.img.train_config(self.optimizer, self.seed);
        c
    }

    pub fn search_config(&self) -> Result<SearchConfig> {
        SearchConfig::new(self.tau)
    }
}
