use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LossHead, Network};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
        }
    }

    /// Turns dL/dy into dL/dz in place, given the activated output y.
    fn backprop(self, y: &Array2<f64>, dy: &mut Array2<f64>) {
        if self == Activation::Relu {
            dy.zip_mut_with(y, |d, &v| {
                if v <= 0.0 {
                    *d = 0.0;
                }
            });
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W` stored output-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((output, input), || rng.gen_range(-limit..=limit));
        Dense {
            weights,
            biases: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.biases;
        self.activation.apply(&mut z);
        z
    }

    /// Accumulates parameter gradients into `gw`/`gb` and returns dL/dx when asked.
    pub(crate) fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        y: &Array2<f64>,
        mut dy: Array2<f64>,
        gw: &mut [f64],
        gb: &mut [f64],
        need_dx: bool,
    ) -> Option<Array2<f64>> {
        self.activation.backprop(y, &mut dy);
        let mut gw = ArrayViewMut2::from_shape(self.weights.dim(), gw).expect("weight grad shape");
        general_mat_mul(1.0, &dy.t(), &x, 1.0, &mut gw);
        let mut gb = ArrayViewMut1::from(gb);
        gb += &dy.sum_axis(Axis(0));
        need_dx.then(|| dy.dot(&self.weights))
    }

    fn slices(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.biases.as_slice().expect("standard layout"),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weights.as_slice_mut().expect("standard layout"),
            self.biases.as_slice_mut().expect("standard layout"),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Format("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim(),
                    found: pair[1].input_dim(),
                });
            }
        }
        for l in &layers {
            if l.biases.len() != l.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: l.output_dim(),
                    found: l.biases.len(),
                });
            }
        }
        Ok(Mlp { layers })
    }

    /// `dims = [in, h1, ..., out]`: ReLU on hidden layers, identity on the last.
    pub fn with_dims<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "need input and output dims");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Dense::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Mlp { layers }
    }

    /// Splits after `at` layers, e.g. an autoencoder into encoder and decoder.
    pub fn split(mut self, at: usize) -> (Mlp, Mlp) {
        assert!(at > 0 && at < self.layers.len());
        let tail = self.layers.split_off(at);
        (self, Mlp { layers: tail })
    }

    pub fn stacked(first: &Mlp, second: &Mlp) -> Result<Mlp> {
        Mlp::new(first.layers.iter().chain(&second.layers).cloned().collect())
    }

    /// Outputs of every layer, starting with the input itself.
    fn activations(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for l in &self.layers {
            let next = l.forward(acts.last().unwrap().view());
            acts.push(next);
        }
        acts
    }

    /// Backprop given cached activations; writes into a flat gradient.
    /// Returns dL/dx when `need_dx`.
    pub(crate) fn backward_into(
        &self,
        acts: &[Array2<f64>],
        dy: Array2<f64>,
        grad: &mut [f64],
        need_dx: bool,
    ) -> Option<Array2<f64>> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.weights.len() + l.biases.len();
        }
        let mut delta = dy;
        for (i, l) in self.layers.iter().enumerate().rev() {
            let (gw, rest) = grad[offsets[i]..].split_at_mut(l.weights.len());
            let gb = &mut rest[..l.biases.len()];
            let want = i > 0 || need_dx;
            {
                let d = l.backward(acts[i].view(), &acts[i + 1], delta, gw, gb, want)?;
                delta = d
            }
        }
        Some(delta)
    }

    pub(crate) fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        self.activations(x)
    }
}

impl Network for Mlp {
    fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }

    fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut iter = self.layers.iter();
        let mut a = iter.next().unwrap().forward(x);
        for l in iter {
            a = l.forward(a.view());
        }
        a
    }

    fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, head: &mut LossHead<'_>) -> Result<(f64, Vec<f64>)> {
        let acts = self.activations(x);
        let (loss, dy) = head(acts.last().unwrap())?;
        let mut grad = vec![0.0; self.param_count()];
        self.backward_into(&acts, dy, &mut grad, false);
        Ok((loss, grad))
    }
}
