use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{block_agreement, decode, encode_unchecked, multihot_dim};
use crate::error::{Error, Result};
use crate::model::{validate_panel, Configuration, Panel};
use crate::nn::{multihot_probabilities, train, Dataset, History, Mlp, Network, Objective, Targets, TrainConfig};

/// Latent width used when none is configured.
pub fn default_latent_dim(config: Configuration) -> usize {
    match config {
        Configuration::Center => 16,
        Configuration::LeftRight | Configuration::UpDown | Configuration::OutInCenter => 32,
        Configuration::Grid2x2 | Configuration::OutInGrid => 64,
        Configuration::Grid3x3 => 96,
    }
}

pub fn default_ae_hidden(config: Configuration) -> usize {
    match config {
        Configuration::Center => 64,
        Configuration::LeftRight | Configuration::UpDown | Configuration::OutInCenter => 128,
        _ => 256,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl AeConfig {
    pub fn for_config(config: Configuration) -> Self {
        AeConfig {
            latent_dim: default_latent_dim(config),
            hidden: default_ae_hidden(config),
            train: TrainConfig {
                max_epochs: 60,
                patience: 6,
                ..TrainConfig::default()
            },
        }
    }
}

/// Encoder `E_S` (multihot to latent) and decoder `D_S` (latent to multihot logits).
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicAutoencoder {
    pub config: Configuration,
    pub latent_dim: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl SymbolicAutoencoder {
    pub fn new(config: Configuration, encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let dim = multihot_dim(config);
        let latent_dim = encoder.output_dim();
        for (expected, found) in [
            (dim, encoder.input_dim()),
            (latent_dim, decoder.input_dim()),
            (dim, decoder.output_dim()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(SymbolicAutoencoder {
            config,
            latent_dim,
            encoder,
            decoder,
        })
    }

    /// Multihots of valid panels, one per row.
    pub fn multihots(&self, panels: &[&Panel]) -> Array2<f64> {
        multihot_matrix(panels, self.config)
    }

    /// `E_S` latents, one row per panel.
    pub fn encode_panels(&self, panels: &[&Panel]) -> Array2<f64> {
        self.encoder.predict(self.multihots(panels).view())
    }

    pub fn latent(&self, panel: &Panel) -> Result<Vec<f64>> {
        let v = validate_panel(panel, self.config);
        if !v.is_empty() {
            return Err(Error::InvalidPanel(format!("{v:?}")));
        }
        Ok(self.encode_panels(&[panel]).into_raw_vec_and_offset().0)
    }

    /// Panels read back from latents through `D_S`.
    pub fn decode_latents(&self, latents: ArrayView2<'_, f64>) -> Result<Vec<Panel>> {
        let logits = self.decoder.predict(latents);
        logits
            .rows()
            .into_iter()
            .map(|row| {
                let probs = multihot_probabilities(row.as_slice().unwrap(), self.config)?;
                decode(&probs, self.config)
            })
            .collect()
    }
}

pub(crate) fn multihot_matrix(panels: &[&Panel], config: Configuration) -> Array2<f64> {
    let dim = multihot_dim(config);
    let mut m = Array2::zeros((panels.len(), dim));
    for (r, p) in panels.iter().enumerate() {
        m.row_mut(r).assign(&ndarray::Array1::from(encode_unchecked(p, config)));
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Fraction of blocks (occupancy bits and occupied entity blocks) decoded correctly.
    pub block_accuracy: f64,
    /// Fraction of panels reconstructed exactly.
    pub panel_accuracy: f64,
    pub panels: usize,
}

pub fn reconstruction_report(ae: &SymbolicAutoencoder, panels: &[&Panel]) -> Result<ReconstructionReport> {
    let x = ae.multihots(panels);
    let logits = ae.decoder.predict(ae.encoder.predict(x.view()).view());
    let mut hits = 0;
    let mut total = 0;
    let mut exact = 0;
    for (r, p) in panels.iter().enumerate() {
        let probs = multihot_probabilities(logits.row(r).as_slice().unwrap(), ae.config)?;
        let (h, t) = block_agreement(&probs, x.row(r).as_slice().unwrap(), ae.config);
        hits += h;
        total += t;
        exact += (decode(&probs, ae.config)? == **p) as usize;
    }
    Ok(ReconstructionReport {
        block_accuracy: hits as f64 / total.max(1) as f64,
        panel_accuracy: exact as f64 / panels.len().max(1) as f64,
        panels: panels.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeTrainReport {
    pub history: History,
    pub heldout: ReconstructionReport,
}

/// Trains encoder and decoder jointly on the multihot reconstruction NLL,
/// using `heldout` panels for early stopping and the final report.
pub fn train_autoencoder(
    panels: &[&Panel],
    heldout: &[&Panel],
    config: Configuration,
    acfg: &AeConfig,
) -> Result<(SymbolicAutoencoder, AeTrainReport)> {
    for p in panels.iter().chain(heldout) {
        let v = validate_panel(p, config);
        if !v.is_empty() {
            return Err(Error::InvalidPanel(format!("{v:?}")));
        }
    }
    let dim = multihot_dim(config);
    let mut rng = ChaCha8Rng::seed_from_u64(acfg.train.seed ^ 0xae);
    let mut net = Mlp::with_dims(&[dim, acfg.hidden, acfg.latent_dim, acfg.hidden, dim], &mut rng);
    let x = multihot_matrix(panels, config);
    let data = Dataset::new(x.clone(), Targets::Vectors(x))?;
    let hx = multihot_matrix(heldout, config);
    let val = Dataset::new(hx.clone(), Targets::Vectors(hx))?;
    let val_ref = (!val.is_empty()).then_some(&val);
    let history = train(&mut net, &data, val_ref, &Objective::MultihotNll(config), &acfg.train)?;
    let (encoder, decoder) = net.split(2);
    let ae = SymbolicAutoencoder::new(config, encoder, decoder)?;
    let heldout = reconstruction_report(&ae, heldout)?;
    Ok((ae, AeTrainReport { history, heldout }))
}
