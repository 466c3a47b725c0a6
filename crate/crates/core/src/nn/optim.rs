use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(format!("unknown optimizer '{s}'")),
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, param_count: usize) -> Self {
        let state = if kind == OptimizerKind::Adam { param_count } else { 0 };
        Optimizer {
            kind,
            lr,
            m: vec![0.0; state],
            v: vec![0.0; state],
            t: 0,
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grad: &[f64]) {
        self.t += 1;
        let mut i = 0;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.into_iter().flat_map(|s| s.iter_mut()) {
                    *p -= self.lr * grad[i];
                    i += 1;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                for p in params.into_iter().flat_map(|s| s.iter_mut()) {
                    let g = grad[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    *p -= self.lr * mh / (vh.sqrt() + EPS);
                    i += 1;
                }
            }
        }
        debug_assert_eq!(i, grad.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_is_lr_sized() {
        let mut p = [1.0, -1.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 2);
        opt.step(vec![&mut p[..]], &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn sgd_step() {
        let mut a = [1.0];
        let mut b = [2.0, 3.0];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5, 3);
        opt.step(vec![&mut a[..], &mut b[..]], &[2.0, 2.0, -2.0]);
        assert_eq!((a[0], b[0], b[1]), (0.0, 1.0, 4.0));
    }
}
