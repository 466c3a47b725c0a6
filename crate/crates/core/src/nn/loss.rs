use ndarray::{Array2, Axis};

use crate::encoding::{GroupKind, MultihotLayout};
use crate::error::{Error, Result};
use crate::model::Configuration;

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|x| x - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Sum of per-block negative log-likelihoods of the target classes.
///
/// One-hot blocks use a softmax over the block. Grid occupancy bits are
/// Bernoulli terms on a sigmoid. Entity blocks of slots that are empty in
/// the target contribute nothing.
pub fn multihot_nll_loss(logits: &[f64], target: &[f64], config: Configuration) -> Result<(f64, Vec<f64>)> {
    let layout = MultihotLayout::for_config(config);
    check_len(layout.dim, logits.len())?;
    check_len(layout.dim, target.len())?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; layout.dim];
    let mut slot_occupied = true;
    for g in &layout.groups {
        let range = g.offset..g.offset + g.width;
        match g.kind {
            GroupKind::Occupancy => {
                let z = logits[g.offset];
                let t = target[g.offset];
                slot_occupied = t > 0.5;
                loss += softplus(z) - t * z;
                grad[g.offset] = sigmoid(z) - t;
            }
            GroupKind::OneHot(_) => {
                if layout.has_occupancy(g.component) && !slot_occupied {
                    continue;
                }
                let class = crate::oracle::argmax_first(&target[range.clone()]);
                let logp = log_softmax(&logits[range.clone()]);
                loss -= logp[class];
                for (k, lp) in logp.iter().enumerate() {
                    grad[g.offset + k] = lp.exp() - (k == class) as u8 as f64;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Per-block probabilities: softmax on one-hot blocks, sigmoid on occupancy bits.
pub fn multihot_probabilities(logits: &[f64], config: Configuration) -> Result<Vec<f64>> {
    let layout = MultihotLayout::for_config(config);
    check_len(layout.dim, logits.len())?;
    let mut out = vec![0.0; layout.dim];
    for g in &layout.groups {
        let range = g.offset..g.offset + g.width;
        match g.kind {
            GroupKind::Occupancy => out[g.offset] = sigmoid(logits[g.offset]),
            GroupKind::OneHot(_) => out[range.clone()].copy_from_slice(&softmax(&logits[range])),
        }
    }
    Ok(out)
}

pub fn softmax_ce_loss(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let logp = log_softmax(logits);
    let grad = logp
        .iter()
        .enumerate()
        .map(|(k, lp)| lp.exp() - (k == label) as u8 as f64)
        .collect();
    Ok((-logp[label], grad))
}

/// Mean of squared differences; gradient with respect to `a`.
pub fn mse_loss(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(a.len(), b.len())?;
    let n = a.len().max(1) as f64;
    let loss = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    let grad = a.iter().zip(b).map(|(x, y)| 2.0 * (x - y) / n).collect();
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    MultihotNll(Configuration),
    CrossEntropy,
    Mse,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Vectors(Array2<f64>),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Vectors(v) => v.nrows(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Vectors(v) => Targets::Vectors(v.select(Axis(0), rows)),
            Targets::Classes(c) => Targets::Classes(rows.iter().map(|&r| c[r]).collect()),
        }
    }
}

/// Inputs one sample per row, with matching targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Targets) -> Result<Self> {
        check_len(inputs.nrows(), targets.len())?;
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(rows),
        }
    }
}

impl Objective {
    /// Summed loss over the rows of `outputs` and the per-row output gradient.
    pub fn batch(&self, outputs: &Array2<f64>, targets: &Targets) -> Result<(f64, Array2<f64>)> {
        check_len(outputs.nrows(), targets.len())?;
        let mut grad = Array2::zeros(outputs.dim());
        let mut total = 0.0;
        for (r, out) in outputs.rows().into_iter().enumerate() {
            let out = out.to_vec();
            let (loss, g) = match (self, targets) {
                (Objective::MultihotNll(config), Targets::Vectors(t)) => {
                    multihot_nll_loss(&out, &t.row(r).to_vec(), *config)?
                }
                (Objective::Mse, Targets::Vectors(t)) => mse_loss(&out, &t.row(r).to_vec())?,
                (Objective::CrossEntropy, Targets::Classes(c)) => softmax_ce_loss(&out, c[r])?,
                _ => return Err(Error::Format(format!("{self:?} does not accept these targets"))),
            };
            total += loss;
            grad.row_mut(r).assign(&ndarray::ArrayView1::from(&g));
        }
        Ok((total, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_center_logits() {
        let mut target = vec![0.0; 21];
        target[1] = 1.0;
        target[7] = 1.0;
        target[11] = 1.0;
        let (loss, _) = multihot_nll_loss(&[0.0; 21], &target, Configuration::Center).unwrap();
        let expected = 5f64.ln() + 6f64.ln() + 10f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((expected - 5.7038).abs() < 1e-4);
    }

    #[test]
    fn confident_logits_near_zero() {
        let mut target = vec![0.0; 21];
        for i in [4, 5, 20] {
            target[i] = 1.0;
        }
        let logits: Vec<f64> = target.iter().map(|t| 60.0 * t).collect();
        let (loss, grad) = multihot_nll_loss(&logits, &target, Configuration::Center).unwrap();
        assert!((0.0..1e-20).contains(&loss));
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    #[test]
    fn empty_slots_are_masked() {
        // 2x2 grid, only slot 3 occupied: loss depends only on the four
        // occupancy bits and slot 3's entity blocks.
        let mut target = vec![0.0; 88];
        for i in [66, 67, 72, 78] {
            target[i] = 1.0;
        }
        let mut logits = vec![0.0; 88];
        logits[5] = 9.0;
        let (loss, grad) = multihot_nll_loss(&logits, &target, Configuration::Grid2x2).unwrap();
        let expected = 4.0 * 2f64.ln() + 5f64.ln() + 6f64.ln() + 10f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        assert_eq!(grad[5], 0.0);
    }

    #[test]
    fn cross_entropy() {
        let (l, _) = softmax_ce_loss(&[0.0, 0.0], 0).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let (l, g) = softmax_ce_loss(&[40.0, 0.0, 0.0], 0).unwrap();
        assert!(l < 1e-15 && g.iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(
            softmax_ce_loss(&[0.0; 3], 3),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
        // Large logits stay finite.
        let (l, _) = softmax_ce_loss(&[1e4, -1e4], 1).unwrap();
        assert!((l - 2e4).abs() < 1e-6);
    }

    #[test]
    fn mse() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
        let (l, g) = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        for logits in [vec![0.0; 5], vec![1e3, -2.0, 3.5], vec![-700.0, -710.0]] {
            let s: f64 = softmax(&logits).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let p = multihot_probabilities(&[0.3; 88], Configuration::Grid2x2).unwrap();
        let s: f64 = p[1..6].iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}
