//! Feed-forward networks trained by minibatch gradient descent.
//!
//! Every network exposes its parameters as a list of flat slices in a fixed
//! order (per layer: weights row-major, then biases). Gradients, optimizer
//! state and the weight file all follow that order.

mod conv;
mod gradcheck;
mod io;
mod loss;
mod mlp;
mod optim;
mod train;

pub use conv::{Conv3x3, ConvLite};
pub use gradcheck::{grad_check, grad_check_with, relative_error, DEFAULT_EPSILON};
pub use io::{load_model, read_model, save_model, write_model, Model, WEIGHT_FORMAT_VERSION};
pub use loss::{
    log_softmax, mse_loss, multihot_nll_loss, multihot_probabilities, softmax, softmax_ce_loss, Dataset, Objective,
    Targets,
};
pub use mlp::{Activation, Dense, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{batch_gradient, evaluate_loss, train, EpochStats, History, TrainConfig};

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Rows per work unit when a batch is split for gradient or inference.
/// Fixed so that floating-point summation order never depends on threads.
pub const CHUNK_ROWS: usize = 32;

/// Maps network outputs to the summed loss and its gradient.
pub type LossHead<'a> = dyn FnMut(&Array2<f64>) -> Result<(f64, Array2<f64>)> + 'a;

pub trait Network: Clone + Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn param_slices(&self) -> Vec<&[f64]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// Outputs for a batch laid out one sample per row.
    fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;

    /// Summed loss and flat parameter gradient over a batch. `head` receives
    /// the network outputs and returns the summed loss together with its
    /// gradient with respect to those outputs.
    fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, head: &mut LossHead<'_>) -> Result<(f64, Vec<f64>)>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn params_flat(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    fn set_params_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            slice.copy_from_slice(&flat[offset..offset + slice.len()]);
            offset += slice.len();
        }
    }

    fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// FNV-1a over the parameter bits; changes whenever any parameter does.
    fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in self.param_slices() {
            for v in s {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100_0000_01b3);
                }
            }
        }
        h
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.forward_batch(view).into_raw_vec_and_offset().0)
    }

    /// `forward_batch` over row chunks, in parallel when enabled.
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = x.nrows();
        let chunk = 8 * CHUNK_ROWS;
        let parts = crate::par::map_range(n.div_ceil(chunk), |c| {
            let lo = c * chunk;
            self.forward_batch(x.slice(s![lo..(lo + chunk).min(n), ..]))
        });
        let mut out = Array2::zeros((n, self.output_dim()));
        for (c, part) in parts.into_iter().enumerate() {
            let lo = c * chunk;
            out.slice_mut(s![lo..lo + part.nrows(), ..]).assign(&part);
        }
        out
    }
}
