use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::tensor::Tensor2;

/// Elementwise `max(0, x)`.
pub fn relu(x: &Tensor2) -> Tensor2 {
    x.map(|v| v.max(0.0))
}

/// ReLU gradient: passes `upstream` where the forward input was positive,
/// zero elsewhere (including at exactly zero).
pub fn relu_backward(input: &Tensor2, upstream: &Tensor2) -> Tensor2 {
    assert!(
        input.same_shape(upstream),
        "relu_backward shape mismatch: {} vs {}",
        input.shape_string(),
        upstream.shape_string()
    );
    Tensor2::from_fn(input.rows(), input.cols(), |r, c| {
        if input.get(r, c) > 0.0 {
            upstream.get(r, c)
        } else {
            0.0
        }
    })
}

pub fn relu_slice(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward_slice(input: &[f64], upstream: &[f64]) -> Vec<f64> {
    debug_assert_eq!(input.len(), upstream.len());
    input
        .iter()
        .zip(upstream)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

/// Mean over the time axis: `out[c] = (1/T) * sum_t x[t, c]`.
///
/// Each channel's addends are summed in ascending value order, which makes
/// the result exactly invariant under any permutation of the rows (the
/// multiset of addends fixes the summation order).
pub fn avg_pool_time(x: &Tensor2) -> Vec<f64> {
    let t = x.rows() as f64;
    let mut column = vec![0.0; x.rows()];
    let mut out = vec![0.0; x.cols()];
    for (c, acc) in out.iter_mut().enumerate() {
        for r in 0..x.rows() {
            column[r] = x.get(r, c);
        }
        column.sort_by(|a, b| a.total_cmp(b));
        *acc = column.iter().sum::<f64>() / t;
    }
    out
}

/// Gradient of `avg_pool_time`: every input row receives `upstream / T`.
pub fn avg_pool_time_backward(rows: usize, upstream: &[f64]) -> Tensor2 {
    assert!(rows >= 1);
    let t = rows as f64;
    Tensor2::from_fn(rows, upstream.len(), |_, c| upstream[c] / t)
}

/// Trainable tensors of one fully-connected layer.
///
/// `weights` is `[out_dim x in_dim]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl AffineParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        assert!(in_dim >= 1 && out_dim >= 1);
        AffineParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform init in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        AffineParams {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut p = AffineParams::zeros(dim, dim);
        for i in 0..dim {
            p.weights[i * dim + i] = 1.0;
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct AffineGrads {
    pub wrt_input: Vec<f64>,
    pub wrt_weights: Vec<f64>,
    pub wrt_bias: Vec<f64>,
}

/// `y[o] = bias[o] + sum_c weights[o, c] * x[c]`.
pub fn affine_forward(x: &[f64], params: &AffineParams) -> Result<Vec<f64>> {
    if x.len() != params.in_dim {
        return Err(Error::ShapeMismatch {
            what: "affine_forward input",
            expected: format!("{} elements", params.in_dim),
            actual: format!("{} elements", x.len()),
        });
    }
    let mut y = params.bias.clone();
    for (o, out) in y.iter_mut().enumerate() {
        let w_row = &params.weights[o * params.in_dim..(o + 1) * params.in_dim];
        for (w, v) in w_row.iter().zip(x) {
            *out += w * v;
        }
    }
    Ok(y)
}

pub fn affine_backward(x: &[f64], params: &AffineParams, upstream: &[f64]) -> Result<AffineGrads> {
    if x.len() != params.in_dim || upstream.len() != params.out_dim {
        return Err(Error::ShapeMismatch {
            what: "affine_backward",
            expected: format!("input {}, upstream {}", params.in_dim, params.out_dim),
            actual: format!("input {}, upstream {}", x.len(), upstream.len()),
        });
    }
    let mut grad_x = vec![0.0; params.in_dim];
    let mut grad_w = vec![0.0; params.weights.len()];
    for (o, &g) in upstream.iter().enumerate() {
        let w_row = &params.weights[o * params.in_dim..(o + 1) * params.in_dim];
        let gw_row = &mut grad_w[o * params.in_dim..(o + 1) * params.in_dim];
        for c in 0..params.in_dim {
            gw_row[c] = g * x[c];
            grad_x[c] += g * w_row[c];
        }
    }
    Ok(AffineGrads {
        wrt_input: grad_x,
        wrt_weights: grad_w,
        wrt_bias: upstream.to_vec(),
    })
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Probability, binary cross-entropy loss, and its gradient for one logit.
#[derive(Debug, Clone, Copy)]
pub struct BceOutput {
    pub probability: f64,
    pub loss: f64,
    pub dloss_dlogit: f64,
}

/// Stable sigmoid + binary cross-entropy:
/// `loss = max(z, 0) - z*y + ln(1 + exp(-|z|))`, `dloss/dz = sigmoid(z) - y`.
/// Does not overflow for any `|z| <= 700`.
pub fn sigmoid_bce(logit: f64, label: bool) -> BceOutput {
    let y = if label { 1.0 } else { 0.0 };
    let probability = sigmoid(logit);
    let loss = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
    BceOutput {
        probability,
        loss,
        dloss_dlogit: probability - y,
    }
}
