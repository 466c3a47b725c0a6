use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{Dataset, Objective};
use super::optim::{Optimizer, OptimizerKind};
use super::{Network, CHUNK_ROWS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidTrainConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

/// Summed loss and gradient over `rows`, computed in fixed-size chunks whose
/// results are added in chunk order.
pub fn batch_gradient<N: Network>(
    net: &N,
    data: &Dataset,
    rows: &[usize],
    objective: &Objective,
) -> Result<(f64, Vec<f64>)> {
    let chunks: Vec<&[usize]> = rows.chunks(CHUNK_ROWS).collect();
    let parts = crate::par::map_slice(&chunks, |idx| {
        let sub = data.select(idx);
        net.loss_and_gradient(sub.inputs.view(), &mut |out| objective.batch(out, &sub.targets))
    });
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// Mean per-sample loss over a dataset.
pub fn evaluate_loss<N: Network>(net: &N, data: &Dataset, objective: &Objective) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let chunk = 8 * CHUNK_ROWS;
    let starts: Vec<usize> = (0..data.len()).step_by(chunk).collect();
    let parts = crate::par::map_slice(&starts, |&lo| {
        let rows: Vec<usize> = (lo..(lo + chunk).min(data.len())).collect();
        let sub = data.select(&rows);
        let out = net.forward_batch(sub.inputs.view());
        objective.batch(&out, &sub.targets).map(|(l, _)| l)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / data.len() as f64)
}

/// Minibatch training with per-epoch shuffling from `cfg.seed`. Stops once
/// the monitored loss (validation if given, else training) has not improved
/// for `patience` epochs, and leaves the best parameters in `net`.
pub fn train<N: Network>(
    net: &mut N,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    objective: &Objective,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidTrainConfig("empty training set".into()));
    }
    if train_set.inputs.ncols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            found: train_set.inputs.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.param_count());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History {
        best_loss: f64::INFINITY,
        ..History::default()
    };
    let mut best_params = net.params_flat();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, mut grad) = batch_gradient(net, train_set, rows, objective)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, loss });
            }
            epoch_loss += loss;
            let scale = 1.0 / rows.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(net.param_slices_mut(), &grad);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = val_set.map(|v| evaluate_loss(net, v, objective)).transpose()?;
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                loss: monitored,
            });
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if monitored < history.best_loss {
            history.best_loss = monitored;
            history.best_epoch = epoch;
            best_params = net.params_flat();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    if !history.epochs.is_empty() {
        net.set_params_flat(&best_params);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, Targets};
    use ndarray::Array2;
    use rand::Rng;

    fn toy_set(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            y.push((a + b > 0.0) as usize);
        }
        Dataset::new(x, Targets::Classes(y)).unwrap()
    }

    #[test]
    fn full_batch_loss_does_not_increase() {
        let data = toy_set(64, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = Mlp::with_dims(&[2, 8, 2], &mut rng);
        let cfg = TrainConfig {
            batch_size: 64,
            max_epochs: 5,
            patience: 5,
            ..TrainConfig::default()
        };
        let h = train(&mut net, &data, None, &Objective::CrossEntropy, &cfg).unwrap();
        assert_eq!(h.epochs.len(), 5);
        for w in h.epochs.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss);
        }
    }

    #[test]
    fn learns_separable_toy() {
        let data = toy_set(400, 3);
        let val = toy_set(200, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::with_dims(&[2, 16, 2], &mut rng);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: 60,
            ..TrainConfig::default()
        };
        train(&mut net, &data, Some(&val), &Objective::CrossEntropy, &cfg).unwrap();
        let out = net.predict(val.inputs.view());
        let Targets::Classes(labels) = &val.targets else {
            unreachable!()
        };
        let correct = out
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(r, &l)| ((r[1] > r[0]) as usize) == l)
            .count();
        assert!(correct >= 190, "{correct}/200");
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let data = toy_set(50, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Mlp::with_dims(&[2, 4, 2], &mut rng);
        let before = net.clone();
        for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let cfg = TrainConfig {
                learning_rate: 0.0,
                batch_size: 8,
                max_epochs: 3,
                optimizer,
                ..TrainConfig::default()
            };
            train(&mut net, &data, None, &Objective::CrossEntropy, &cfg).unwrap();
            assert_eq!(net, before);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let data = toy_set(100, 8);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut net = Mlp::with_dims(&[2, 6, 2], &mut rng);
            let cfg = TrainConfig {
                max_epochs: 4,
                batch_size: 70,
                ..TrainConfig::default()
            };
            let h = train(&mut net, &data, None, &Objective::CrossEntropy, &cfg).unwrap();
            (net.checksum(), h)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_config_and_nan() {
        let data = toy_set(10, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Mlp::with_dims(&[2, 3, 2], &mut rng);
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&mut net, &data, None, &Objective::CrossEntropy, &bad),
            Err(Error::InvalidTrainConfig(_))
        ));
        net.layers[0].weights[[0, 0]] = f64::NAN;
        assert!(matches!(
            train(&mut net, &data, None, &Objective::CrossEntropy, &TrainConfig::default()),
            Err(Error::NonFiniteLoss { epoch: 0, .. })
        ));
    }

    #[test]
    fn early_stopping_restores_best() {
        let data = toy_set(40, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut net = Mlp::with_dims(&[2, 4, 2], &mut rng);
        // Large SGD steps oscillate, so the best epoch is not the last.
        let cfg = TrainConfig {
            learning_rate: 5.0,
            optimizer: OptimizerKind::Sgd,
            max_epochs: 50,
            patience: 2,
            batch_size: 40,
            ..TrainConfig::default()
        };
        let h = train(&mut net, &data, Some(&data), &Objective::CrossEntropy, &cfg).unwrap();
        let final_loss = evaluate_loss(&net, &data, &Objective::CrossEntropy).unwrap();
        assert_eq!(final_loss, h.best_loss);
        assert!(h.stopped_early);
    }
}
