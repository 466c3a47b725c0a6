//! Small convolutional encoder for grayscale rasters.
//!
//! Each stage is a 3x3 convolution (zero padding 1), ReLU and 2x2 max pooling.
//! Feature maps are stored one pixel per row with channels as columns, rows
//! ordered by (sample, y, x), so a convolution is an im2col followed by one
//! matrix product.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use super::mlp::Mlp;
use super::{LossHead, Network};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    /// Rows indexed by `(ky * 3 + kx) * in_ch + ci`, one column per output channel.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Conv3x3 {
    pub fn glorot<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (9 * (in_ch + out_ch)) as f64).sqrt();
        Conv3x3 {
            in_ch,
            out_ch,
            weights: Array2::from_shape_simple_fn((9 * in_ch, out_ch), || rng.gen_range(-limit..=limit)),
            biases: Array1::zeros(out_ch),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
}

fn im2col(a: &Array2<f64>, g: Geometry) -> Array2<f64> {
    let c = a.ncols();
    let mut cols = Array2::zeros((g.n * g.h * g.w, 9 * c));
    let src = a.as_slice().expect("standard layout");
    let dst = cols.as_slice_mut().unwrap();
    for b in 0..g.n {
        for y in 0..g.h {
            for x in 0..g.w {
                let r = (b * g.h + y) * g.w + x;
                for ky in 0..3 {
                    let Some(yy) = (y + ky).checked_sub(1).filter(|&v| v < g.h) else {
                        continue;
                    };
                    for kx in 0..3 {
                        let Some(xx) = (x + kx).checked_sub(1).filter(|&v| v < g.w) else {
                            continue;
                        };
                        let s = ((b * g.h + yy) * g.w + xx) * c;
                        let d = r * 9 * c + (ky * 3 + kx) * c;
                        dst[d..d + c].copy_from_slice(&src[s..s + c]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &Array2<f64>, g: Geometry, c: usize) -> Array2<f64> {
    let mut da = Array2::zeros((g.n * g.h * g.w, c));
    let src = dcols.as_slice().expect("standard layout");
    let dst = da.as_slice_mut().unwrap();
    for b in 0..g.n {
        for y in 0..g.h {
            for x in 0..g.w {
                let r = (b * g.h + y) * g.w + x;
                for ky in 0..3 {
                    let Some(yy) = (y + ky).checked_sub(1).filter(|&v| v < g.h) else {
                        continue;
                    };
                    for kx in 0..3 {
                        let Some(xx) = (x + kx).checked_sub(1).filter(|&v| v < g.w) else {
                            continue;
                        };
                        let s = r * 9 * c + (ky * 3 + kx) * c;
                        let d = ((b * g.h + yy) * g.w + xx) * c;
                        for k in 0..c {
                            dst[d + k] += src[s + k];
                        }
                    }
                }
            }
        }
    }
    da
}

/// 2x2 max pooling; also returns the flat input index that won each output.
fn max_pool(a: &Array2<f64>, g: Geometry) -> (Array2<f64>, Vec<usize>) {
    let c = a.ncols();
    let (h2, w2) = (g.h / 2, g.w / 2);
    let mut out = Array2::zeros((g.n * h2 * w2, c));
    let mut arg = vec![0usize; g.n * h2 * w2 * c];
    let src = a.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().unwrap();
    for b in 0..g.n {
        for y in 0..h2 {
            for x in 0..w2 {
                let r = (b * h2 + y) * w2 + x;
                for k in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut at = 0;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let i = ((b * g.h + 2 * y + dy) * g.w + 2 * x + dx) * c + k;
                        if src[i] > best {
                            best = src[i];
                            at = i;
                        }
                    }
                    dst[r * c + k] = best;
                    arg[r * c + k] = at;
                }
            }
        }
    }
    (out, arg)
}

struct StageCache {
    geometry: Geometry,
    cols: Array2<f64>,
    activated: Array2<f64>,
    argmax: Vec<usize>,
}

/// Convolution stages followed by a dense head on the flattened features.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLite {
    pub height: usize,
    pub width: usize,
    pub convs: Vec<Conv3x3>,
    pub head: Mlp,
}

impl ConvLite {
    /// `channels` per stage; `head_hidden` widths between features and output.
    pub fn new<R: Rng + ?Sized>(
        height: usize,
        width: usize,
        channels: &[usize],
        head_hidden: &[usize],
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let div = 1usize << channels.len();
        if channels.is_empty() || !height.is_multiple_of(div) || !width.is_multiple_of(div) {
            return Err(Error::InvalidTrainConfig(format!(
                "{height}x{width} raster is not divisible by {div} for {} stages",
                channels.len()
            )));
        }
        let mut convs = Vec::new();
        let mut prev = 1;
        for &c in channels {
            convs.push(Conv3x3::glorot(prev, c, rng));
            prev = c;
        }
        let features = (height / div) * (width / div) * prev;
        let mut dims = vec![features];
        dims.extend_from_slice(head_hidden);
        dims.push(output);
        Ok(ConvLite {
            height,
            width,
            convs,
            head: Mlp::with_dims(&dims, rng),
        })
    }

    pub fn from_parts(height: usize, width: usize, convs: Vec<Conv3x3>, head: Mlp) -> Result<Self> {
        let mut prev = 1;
        for c in &convs {
            if c.in_ch != prev || c.weights.dim() != (9 * c.in_ch, c.out_ch) || c.biases.len() != c.out_ch {
                return Err(Error::Format("inconsistent convolution stage".into()));
            }
            prev = c.out_ch;
        }
        let div = 1usize << convs.len();
        let features = (height / div) * (width / div) * prev;
        if convs.is_empty() || !height.is_multiple_of(div) || !width.is_multiple_of(div) || head.input_dim() != features
        {
            return Err(Error::Format("convolution geometry does not match head".into()));
        }
        Ok(ConvLite {
            height,
            width,
            convs,
            head,
        })
    }

    fn features(&self, x: ArrayView2<'_, f64>, mut caches: Option<&mut Vec<StageCache>>) -> Array2<f64> {
        let n = x.nrows();
        let mut a = x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n * self.height * self.width, 1))
            .expect("input reshape");
        let mut g = Geometry {
            n,
            h: self.height,
            w: self.width,
        };
        for conv in &self.convs {
            let cols = im2col(&a, g);
            let mut z = cols.dot(&conv.weights);
            z += &conv.biases;
            z.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
            let (pooled, argmax) = max_pool(&z, g);
            if let Some(c) = caches.as_deref_mut() {
                c.push(StageCache {
                    geometry: g,
                    cols,
                    activated: z,
                    argmax,
                });
            }
            a = pooled;
            g = Geometry {
                n,
                h: g.h / 2,
                w: g.w / 2,
            };
        }
        let per_sample = g.h * g.w * a.ncols();
        a.into_shape_with_order((n, per_sample)).expect("flatten")
    }

    fn conv_param_count(&self) -> usize {
        self.convs.iter().map(|c| c.weights.len() + c.biases.len()).sum()
    }
}

impl Network for ConvLite {
    fn input_dim(&self) -> usize {
        self.height * self.width
    }

    fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for c in &self.convs {
            v.push(c.weights.as_slice().unwrap());
            v.push(c.biases.as_slice().unwrap());
        }
        v.extend(self.head.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.convs {
            v.push(c.weights.as_slice_mut().unwrap());
            v.push(c.biases.as_slice_mut().unwrap());
        }
        v.extend(self.head.param_slices_mut());
        v
    }

    fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let f = self.features(x, None);
        self.head.forward_batch(f.view())
    }

    fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, head: &mut LossHead<'_>) -> Result<(f64, Vec<f64>)> {
        let n = x.nrows();
        let mut caches = Vec::with_capacity(self.convs.len());
        let feats = self.features(x, Some(&mut caches));
        let acts = self.head.forward_cached(feats.view());
        let (loss, dy) = head(acts.last().unwrap())?;

        let mut grad = vec![0.0; self.param_count()];
        let conv_params = self.conv_param_count();
        let dfeat = self
            .head
            .backward_into(&acts, dy, &mut grad[conv_params..], true)
            .expect("input gradient requested");

        let last_c = self.convs.last().unwrap().out_ch;
        let mut dpooled = dfeat
            .into_shape_with_order((dfeat_rows(n, &caches), last_c))
            .expect("unflatten");
        let mut offset = conv_params;
        for (i, (conv, cache)) in self.convs.iter().zip(&caches).enumerate().rev() {
            offset -= conv.weights.len() + conv.biases.len();
            // Route pooled gradients back to the winning pixels, then through ReLU.
            let mut dz = Array2::<f64>::zeros(cache.activated.dim());
            {
                let dzs = dz.as_slice_mut().unwrap();
                for (j, &at) in cache.argmax.iter().enumerate() {
                    dzs[at] += dpooled.as_slice().unwrap()[j];
                }
            }
            dz.zip_mut_with(&cache.activated, |d, &v| {
                if v <= 0.0 {
                    *d = 0.0;
                }
            });
            let (gw, rest) = grad[offset..].split_at_mut(conv.weights.len());
            let mut gw = ArrayViewMut2::from_shape(conv.weights.dim(), gw).unwrap();
            general_mat_mul(1.0, &cache.cols.t(), &dz, 1.0, &mut gw);
            let mut gb = ArrayViewMut1::from(&mut rest[..conv.biases.len()]);
            gb += &dz.sum_axis(Axis(0));
            if i > 0 {
                let dcols = dz.dot(&conv.weights.t());
                dpooled = col2im(&dcols, cache.geometry, conv.in_ch);
            }
        }
        Ok((loss, grad))
    }
}

fn dfeat_rows(n: usize, caches: &[StageCache]) -> usize {
    let g = caches.last().unwrap().geometry;
    n * (g.h / 2) * (g.w / 2)
}
