use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autoencoder::SymbolicAutoencoder;
use crate::error::{Error, Result};
use crate::model::{Configuration, Panel};
use crate::nn::{train, ConvLite, Dataset, History, Mlp, Model, Network, Objective, Targets, TrainConfig};
use crate::par;
use crate::renderer::{render_panel, Raster, DEFAULT_RASTER_SIZE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageArch {
    FlattenedMlp,
    ConvLite,
}

impl ImageArch {
    /// Convolutions for 64-pixel rasters and up, a plain MLP below that.
    pub fn default_for(raster_size: usize) -> Self {
        if raster_size >= 64 && raster_size.is_multiple_of(4) {
            ImageArch::ConvLite
        } else {
            ImageArch::FlattenedMlp
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ImageArch::FlattenedMlp => "flattened-mlp",
            ImageArch::ConvLite => "conv-lite",
        }
    }
}

impl fmt::Display for ImageArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ImageArch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "flattened-mlp" | "mlp" => Ok(ImageArch::FlattenedMlp),
            "conv-lite" | "conv" => Ok(ImageArch::ConvLite),
            _ => Err(format!("unknown image architecture '{s}'")),
        }
    }
}

/// `E_X`: raster to symbolic latent.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEncoder {
    pub config: Configuration,
    pub raster_size: usize,
    pub net: Model,
}

impl ImageEncoder {
    pub fn new(config: Configuration, raster_size: usize, net: Model) -> Result<Self> {
        let pixels = raster_size * raster_size;
        if net.input_dim() != pixels {
            return Err(Error::DimensionMismatch {
                expected: pixels,
                found: net.input_dim(),
            });
        }
        Ok(ImageEncoder {
            config,
            raster_size,
            net,
        })
    }

    pub fn arch(&self) -> ImageArch {
        match self.net {
            Model::Mlp(_) => ImageArch::FlattenedMlp,
            Model::ConvLite(_) => ImageArch::ConvLite,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn encode_rasters(&self, rasters: &[Raster]) -> Result<Array2<f64>> {
        Ok(self.net.predict(raster_matrix(rasters, self.raster_size)?.view()))
    }

    /// Renders the panels and encodes them, one latent per row.
    pub fn latents(&self, panels: &[&Panel]) -> Result<Array2<f64>> {
        let rasters = render_all(panels, self.config, self.raster_size)?;
        self.encode_rasters(&rasters)
    }
}

pub fn render_all(panels: &[&Panel], config: Configuration, size: usize) -> Result<Vec<Raster>> {
    par::map_slice(panels, |p| render_panel(p, config, size))
        .into_iter()
        .collect()
}

/// Network input rows: 0 for background up to 1 for black.
pub fn raster_matrix(rasters: &[Raster], size: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((rasters.len(), size * size));
    for (r, raster) in rasters.iter().enumerate() {
        if raster.width != size || raster.height != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: raster.width,
            });
        }
        for (dst, &p) in m.row_mut(r).iter_mut().zip(&raster.pixels) {
            *dst = (255 - p) as f64 / 255.0;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTrainConfig {
    pub raster_size: usize,
    pub arch: ImageArch,
    pub conv_channels: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub mlp_hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for ImageTrainConfig {
    fn default() -> Self {
        ImageTrainConfig::for_size(DEFAULT_RASTER_SIZE)
    }
}

impl ImageTrainConfig {
    pub fn for_size(raster_size: usize) -> Self {
        ImageTrainConfig {
            raster_size,
            arch: ImageArch::default_for(raster_size),
            conv_channels: vec![8, 16],
            head_hidden: vec![128],
            mlp_hidden: vec![256, 128],
            train: TrainConfig {
                max_epochs: 40,
                patience: 5,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageTrainReport {
    pub history: History,
    /// Mean per-dimension squared error between `E_X` and `E_S` latents on held-out panels.
    pub alignment_mse: f64,
    /// Mean per-dimension squared distance between `E_S` latents of distinct held-out panels.
    pub latent_scale: f64,
    /// Share of up to 100 distinct training panels whose image latent is
    /// nearest to their own symbolic latent among the probe set.
    pub nearest_neighbor: f64,
}

fn mean_sq(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

fn distinct<'a>(panels: &[&'a Panel], limit: usize) -> Vec<&'a Panel> {
    let mut seen = HashSet::new();
    panels.iter().copied().filter(|p| seen.insert(*p)).take(limit).collect()
}

fn latent_scale(z: ArrayView2<'_, f64>) -> f64 {
    let n = z.nrows();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += z
                .row(i)
                .iter()
                .zip(z.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            pairs += 1;
        }
    }
    total / (pairs.max(1) * z.ncols().max(1)) as f64
}

fn nearest_neighbor_rate(ex: ArrayView2<'_, f64>, es: ArrayView2<'_, f64>) -> f64 {
    let n = ex.nrows();
    let hits = (0..n)
        .filter(|&i| {
            let d = |j: usize| {
                ex.row(i)
                    .iter()
                    .zip(es.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            };
            let own = d(i);
            (0..n).all(|j| j == i || d(j) > own)
        })
        .count();
    hits as f64 / n.max(1) as f64
}

/// Fits `E_X` so that `E_X(render(p))` matches the frozen `E_S(encode(p))`.
pub fn train_image_encoder(
    panels: &[&Panel],
    heldout: &[&Panel],
    ae: &SymbolicAutoencoder,
    icfg: &ImageTrainConfig,
) -> Result<(ImageEncoder, ImageTrainReport)> {
    let size = icfg.raster_size;
    let mut rng = ChaCha8Rng::seed_from_u64(icfg.train.seed ^ 0x1e);
    let net = match icfg.arch {
        ImageArch::ConvLite => Model::ConvLite(ConvLite::new(
            size,
            size,
            &icfg.conv_channels,
            &icfg.head_hidden,
            ae.latent_dim,
            &mut rng,
        )?),
        ImageArch::FlattenedMlp => {
            let mut dims = vec![size * size];
            dims.extend(&icfg.mlp_hidden);
            dims.push(ae.latent_dim);
            Model::Mlp(Mlp::with_dims(&dims, &mut rng))
        }
    };
    let mut enc = ImageEncoder::new(ae.config, size, net)?;

    let x = raster_matrix(&render_all(panels, ae.config, size)?, size)?;
    let data = Dataset::new(x, Targets::Vectors(ae.encode_panels(panels)))?;
    let hx = raster_matrix(&render_all(heldout, ae.config, size)?, size)?;
    let hz = ae.encode_panels(heldout);
    let val = Dataset::new(hx, Targets::Vectors(hz.clone()))?;
    let history = train(
        &mut enc.net,
        &data,
        (!val.is_empty()).then_some(&val),
        &Objective::Mse,
        &icfg.train,
    )?;

    let alignment_mse = mean_sq(enc.net.predict(val.inputs.view()).view(), hz.view());
    let scale_set = distinct(heldout, 200);
    let latent_scale = latent_scale(ae.encode_panels(&scale_set).view());
    let probe = distinct(panels, 100);
    let nearest_neighbor = nearest_neighbor_rate(enc.latents(&probe)?.view(), ae.encode_panels(&probe).view());
    Ok((
        enc,
        ImageTrainReport {
            history,
            alignment_mse,
            latent_scale,
            nearest_neighbor,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn arch_defaults_and_names() {
        assert_eq!(ImageArch::default_for(64), ImageArch::ConvLite);
        assert_eq!(ImageArch::default_for(32), ImageArch::FlattenedMlp);
        assert_eq!("conv-lite".parse::<ImageArch>().unwrap(), ImageArch::ConvLite);
        assert!("cnn".parse::<ImageArch>().is_err());
    }

    #[test]
    fn scale_and_probe_helpers() {
        let z = array![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        // Pair distances 4, 4, 8 over 2 dims.
        assert!((latent_scale(z.view()) - 16.0 / 6.0).abs() < 1e-12);
        assert_eq!(nearest_neighbor_rate(z.view(), z.view()), 1.0);
        let swapped = array![[2.0, 0.0], [0.0, 0.0], [0.0, 2.0]];
        assert!((nearest_neighbor_rate(swapped.view(), z.view()) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn raster_input_range() {
        let mut r = Raster::blank(4, 4);
        r.pixels[0] = 0;
        let m = raster_matrix(&[r], 4).unwrap();
        assert_eq!(m[[0, 0]], 1.0);
        assert_eq!(m[[0, 1]], 0.0);
        assert!(raster_matrix(&[Raster::blank(3, 3)], 4).is_err());
    }
}
