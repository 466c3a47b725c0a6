use super::loss::{Dataset, Objective};
use super::Network;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Gradients smaller than this in magnitude are compared absolutely.
const FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn summed_loss<N: Network>(net: &N, data: &Dataset, objective: &Objective) -> Result<f64> {
    let out = net.forward_batch(data.inputs.view());
    objective.batch(&out, &data.targets).map(|(l, _)| l)
}

/// Worst relative error between the network's backprop gradient and a
/// central-difference estimate over every parameter.
pub fn grad_check<N: Network>(net: &N, objective: &Objective, data: &Dataset, epsilon: f64) -> Result<f64> {
    let (_, analytic) = net.loss_and_gradient(data.inputs.view(), &mut |out| objective.batch(out, &data.targets))?;
    grad_check_with(net, objective, data, &analytic, epsilon)
}

/// Same check against a caller-supplied gradient.
pub fn grad_check_with<N: Network>(
    net: &N,
    objective: &Objective,
    data: &Dataset,
    analytic: &[f64],
    epsilon: f64,
) -> Result<f64> {
    if analytic.len() != net.param_count() {
        return Err(Error::DimensionMismatch {
            expected: net.param_count(),
            found: analytic.len(),
        });
    }
    let mut probe = net.clone();
    let base = net.params_flat();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[i] = base[i] + epsilon;
        probe.set_params_flat(&p);
        let plus = summed_loss(&probe, data, objective)?;
        p[i] = base[i] - epsilon;
        probe.set_params_flat(&p);
        let minus = summed_loss(&probe, data, objective)?;
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, multihot_dim};
    use crate::generator::{generate_indexed, GeneratorConfig};
    use crate::model::Configuration;
    use crate::nn::{Mlp, Targets};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_inputs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn multihot_nll_two_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for config in [Configuration::Center, Configuration::Grid2x2] {
            let dim = multihot_dim(config);
            let p = generate_indexed(&GeneratorConfig::new(config, 5), 0).unwrap();
            let t = encode(&p.matrix[0], config).unwrap().values;
            let targets = Array2::from_shape_vec((1, dim), t).unwrap();
            let data = Dataset::new(random_inputs(&mut rng, 1, 6), Targets::Vectors(targets)).unwrap();
            let net = Mlp::with_dims(&[6, 12, dim], &mut rng);
            let err = grad_check(&net, &Objective::MultihotNll(config), &data, DEFAULT_EPSILON).unwrap();
            assert!(err < 1e-4, "{config}: {err}");
        }
    }

    #[test]
    fn mse_and_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::with_dims(&[5, 9, 4], &mut rng);
        let x = random_inputs(&mut rng, 3, 5);
        let mse = Dataset::new(x.clone(), Targets::Vectors(random_inputs(&mut rng, 3, 4))).unwrap();
        assert!(grad_check(&net, &Objective::Mse, &mse, DEFAULT_EPSILON).unwrap() < 1e-4);
        let ce = Dataset::new(x, Targets::Classes(vec![0, 3, 1])).unwrap();
        assert!(grad_check(&net, &Objective::CrossEntropy, &ce, DEFAULT_EPSILON).unwrap() < 1e-4);
    }

    #[test]
    fn negated_gradient_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::with_dims(&[4, 6, 3], &mut rng);
        let data = Dataset::new(random_inputs(&mut rng, 2, 4), Targets::Classes(vec![2, 0])).unwrap();
        let (_, g) = net
            .loss_and_gradient(data.inputs.view(), &mut |o| {
                Objective::CrossEntropy.batch(o, &data.targets)
            })
            .unwrap();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let err = grad_check_with(&net, &Objective::CrossEntropy, &data, &neg, DEFAULT_EPSILON).unwrap();
        assert!((err - 2.0).abs() < 1e-3, "{err}");
    }
}
