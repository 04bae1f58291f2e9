//! Central-difference gradient checking.
//!
//! The checker treats the function under test as a scalar map of a flat
//! parameter vector and never looks at the analytic backward path, so it
//! stays an independent oracle for every layer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numcore::conv::{temporal_conv_backward, temporal_conv_forward, ConvParams, ConvSpec};
use crate::numcore::dense::{
    affine_backward, affine_forward, avg_pool_time, avg_pool_time_backward, relu, relu_backward,
    sigmoid_bce, AffineParams,
};
use crate::numcore::tensor::Tensor2;

/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` for every coordinate.
pub fn central_difference_grad(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    eps: f64,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    grad
}

/// Worst relative error between two gradient vectors. The denominator is
/// floored at 1e-12 so exact zeros do not blow up the ratio.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-12))
        .fold(0.0, f64::max)
}

/// Runs `f` through central differences at `x` and compares against the
/// provided analytic gradient, returning the max relative error.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    eps: f64,
) -> f64 {
    let numeric = central_difference_grad(&mut f, x, eps);
    max_relative_error(analytic, &numeric)
}

/// Outcome of one layer's gradient-check sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Samples away from zero so ReLU kinks do not sit inside the probe window.
fn sample_off_kink(rng: &mut impl Rng) -> f64 {
    let v: f64 = rng.random_range(-1.5..1.5);
    if v.abs() < 0.05 {
        v + 0.1 * v.signum().max(0.0) * 2.0 - 0.1
    } else {
        v
    }
}

fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    Tensor2::from_fn(rows, cols, |_, _| sample_off_kink(rng))
}

/// Conv layer check: scalarizes via a fixed random upstream
/// `f(params, x) = sum_{t,o} upstream[t,o] * conv(x)[t,o]` and checks the
/// gradient with respect to weights, bias, and input jointly.
fn check_conv_instance(rng: &mut impl Rng) -> f64 {
    let spec = ConvSpec::new(
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=2),
    );
    let t = rng.random_range(spec.filter_width..spec.filter_width + 5);
    let x = random_tensor(t, spec.in_channels, rng);
    let params = ConvParams::init(&spec, rng);
    let out_len = spec.output_len(t).unwrap();
    let upstream = random_tensor(out_len, spec.out_channels, rng);

    let grads = temporal_conv_backward(&x, &params, &spec, &upstream).unwrap();
    let mut analytic = grads.wrt_weights.clone();
    analytic.extend_from_slice(&grads.wrt_bias);
    analytic.extend_from_slice(grads.wrt_input.data());

    let mut flat = params.weights.clone();
    flat.extend_from_slice(&params.bias);
    flat.extend_from_slice(x.data());

    let n_w = params.weights.len();
    let n_b = params.bias.len();
    grad_check(
        |v: &[f64]| {
            let p = ConvParams {
                weights: v[..n_w].to_vec(),
                bias: v[n_w..n_w + n_b].to_vec(),
            };
            let xt = Tensor2::from_vec(t, spec.in_channels, v[n_w + n_b..].to_vec()).unwrap();
            let y = temporal_conv_forward(&xt, &p, &spec).unwrap();
            y.data()
                .iter()
                .zip(upstream.data())
                .map(|(a, b)| a * b)
                .sum()
        },
        &flat,
        &analytic,
        GRADCHECK_EPS,
    )
}

fn check_affine_instance(rng: &mut impl Rng) -> f64 {
    let in_dim = rng.random_range(1..=5);
    let out_dim = rng.random_range(1..=4);
    let params = AffineParams::init(in_dim, out_dim, rng);
    let x: Vec<f64> = (0..in_dim).map(|_| sample_off_kink(rng)).collect();
    let upstream: Vec<f64> = (0..out_dim).map(|_| sample_off_kink(rng)).collect();

    let grads = affine_backward(&x, &params, &upstream).unwrap();
    let mut analytic = grads.wrt_weights.clone();
    analytic.extend_from_slice(&grads.wrt_bias);
    analytic.extend_from_slice(&grads.wrt_input);

    let mut flat = params.weights.clone();
    flat.extend_from_slice(&params.bias);
    flat.extend_from_slice(&x);

    let n_w = params.weights.len();
    grad_check(
        |v: &[f64]| {
            let p = AffineParams {
                in_dim,
                out_dim,
                weights: v[..n_w].to_vec(),
                bias: v[n_w..n_w + out_dim].to_vec(),
            };
            let y = affine_forward(&v[n_w + out_dim..], &p).unwrap();
            y.iter().zip(&upstream).map(|(a, b)| a * b).sum()
        },
        &flat,
        &analytic,
        GRADCHECK_EPS,
    )
}

fn check_relu_instance(rng: &mut impl Rng) -> f64 {
    let rows = rng.random_range(1..=4);
    let cols = rng.random_range(1..=4);
    let x = random_tensor(rows, cols, rng);
    let upstream = random_tensor(rows, cols, rng);
    let analytic = relu_backward(&x, &upstream);
    grad_check(
        |v: &[f64]| {
            let xt = Tensor2::from_vec(rows, cols, v.to_vec()).unwrap();
            relu(&xt)
                .data()
                .iter()
                .zip(upstream.data())
                .map(|(a, b)| a * b)
                .sum()
        },
        x.data(),
        analytic.data(),
        GRADCHECK_EPS,
    )
}

fn check_avg_pool_instance(rng: &mut impl Rng) -> f64 {
    let rows = rng.random_range(1..=6);
    let cols = rng.random_range(1..=4);
    let x = random_tensor(rows, cols, rng);
    let upstream: Vec<f64> = (0..cols).map(|_| sample_off_kink(rng)).collect();
    let analytic = avg_pool_time_backward(rows, &upstream);
    grad_check(
        |v: &[f64]| {
            let xt = Tensor2::from_vec(rows, cols, v.to_vec()).unwrap();
            avg_pool_time(&xt)
                .iter()
                .zip(&upstream)
                .map(|(a, b)| a * b)
                .sum()
        },
        x.data(),
        analytic.data(),
        GRADCHECK_EPS,
    )
}

fn check_sigmoid_bce_instance(rng: &mut impl Rng) -> f64 {
    let logit = rng.random_range(-3.0..3.0);
    let label = rng.random_range(0..2) == 1;
    let analytic = [sigmoid_bce(logit, label).dloss_dlogit];
    grad_check(
        |v: &[f64]| sigmoid_bce(v[0], label).loss,
        &[logit],
        &analytic,
        GRADCHECK_EPS,
    )
}

/// Checks every kernel's backward pass against central differences on
/// `instances` seeded random cases each.
pub fn run_layer_gradchecks(instances: usize, base_seed: u64) -> Vec<GradCheckReport> {
    let layers: [(&'static str, fn(&mut ChaCha8Rng) -> f64); 5] = [
        ("temporal_conv", |r| check_conv_instance(r)),
        ("affine", |r| check_affine_instance(r)),
        ("relu", |r| check_relu_instance(r)),
        ("avg_pool_time", |r| check_avg_pool_instance(r)),
        ("sigmoid_bce", |r| check_sigmoid_bce_instance(r)),
    ];
    layers
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
            let max_rel_err = (0..instances)
                .map(|_| check(&mut rng))
                .fold(0.0, f64::max);
            GradCheckReport {
                name,
                instances,
                max_rel_err,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_difference_recovers_quadratic_gradient() {
        // f(x) = x0^2 + 3 x1, df = (2 x0, 3).
        let grad = central_difference_grad(
            &mut |v: &[f64]| v[0] * v[0] + 3.0 * v[1],
            &[1.5, -2.0],
            1e-5,
        );
        assert!((grad[0] - 3.0).abs() < 1e-9);
        assert!((grad[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn relative_error_floors_denominator() {
        assert_eq!(max_relative_error(&[0.0], &[0.0]), 0.0);
        let e = max_relative_error(&[0.0], &[1e-13]);
        assert!(e <= 0.1 + 1e-9);
    }

    #[test]
    fn conv_backward_matches_finite_differences_on_spec_case() {
        // T=6, k=3, s=1, C=2.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let spec = ConvSpec::new(2, 2, 3, 1);
        let x = random_tensor(6, 2, &mut rng);
        let params = ConvParams::init(&spec, &mut rng);
        let upstream = random_tensor(spec.output_len(6).unwrap(), 2, &mut rng);
        let grads = temporal_conv_backward(&x, &params, &spec, &upstream).unwrap();

        let mut analytic = grads.wrt_weights.clone();
        analytic.extend_from_slice(&grads.wrt_bias);
        let mut flat = params.weights.clone();
        flat.extend_from_slice(&params.bias);
        let n_w = params.weights.len();
        let err = grad_check(
            |v: &[f64]| {
                let p = ConvParams {
                    weights: v[..n_w].to_vec(),
                    bias: v[n_w..].to_vec(),
                };
                let y = temporal_conv_forward(&x, &p, &spec).unwrap();
                y.data()
                    .iter()
                    .zip(upstream.data())
                    .map(|(a, b)| a * b)
                    .sum()
            },
            &flat,
            &analytic,
            1e-5,
        );
        assert!(err < 1e-6, "conv gradcheck rel err {err}");
    }

    #[test]
    fn affine_gradcheck_on_4x3_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = AffineParams::init(3, 4, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| sample_off_kink(&mut rng)).collect();
        let upstream: Vec<f64> = (0..4).map(|_| sample_off_kink(&mut rng)).collect();
        let grads = affine_backward(&x, &params, &upstream).unwrap();
        let err = grad_check(
            |v: &[f64]| {
                let p = AffineParams {
                    in_dim: 3,
                    out_dim: 4,
                    weights: v.to_vec(),
                    bias: params.bias.clone(),
                };
                affine_forward(&x, &p)
                    .unwrap()
                    .iter()
                    .zip(&upstream)
                    .map(|(a, b)| a * b)
                    .sum()
            },
            &params.weights,
            &grads.wrt_weights,
            1e-5,
        );
        assert!(err < 1e-6, "affine gradcheck rel err {err}");
    }

    #[test]
    fn bce_gradient_matches_at_0p3() {
        for label in [false, true] {
            let analytic = [sigmoid_bce(0.3, label).dloss_dlogit];
            let err = grad_check(
                |v: &[f64]| sigmoid_bce(v[0], label).loss,
                &[0.3],
                &analytic,
                1e-5,
            );
            assert!(err < 1e-8, "bce gradcheck rel err {err}");
        }
    }

    #[test]
    fn full_layer_sweep_stays_under_tolerance() {
        for report in run_layer_gradchecks(20, 1234) {
            assert!(
                report.passed(GRADCHECK_TOLERANCE),
                "{} failed: max rel err {}",
                report.name,
                report.max_rel_err
            );
        }
    }
}
