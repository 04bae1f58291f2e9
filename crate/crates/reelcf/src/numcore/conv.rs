use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::tensor::Tensor2;

/// Shape of a temporal convolution layer.
///
/// Filters slide along the time axis only, with no padding. Every filter
/// spans all input channels, so one filter is a `[filter_width x in_channels]`
/// block producing one output channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub filter_width: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, filter_width: usize, stride: usize) -> Self {
        assert!(in_channels >= 1, "in_channels must be >= 1");
        assert!(out_channels >= 1, "out_channels must be >= 1");
        assert!(filter_width >= 1, "filter_width must be >= 1");
        assert!(stride >= 1, "stride must be >= 1");
        ConvSpec {
            in_channels,
            out_channels,
            filter_width,
            stride,
        }
    }

    /// Output length for an input of `input_len` timesteps:
    /// `floor((T - k) / s) + 1`, valid convolution only.
    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len < self.filter_width {
            return Err(Error::SequenceTooShort {
                len: input_len,
                filter_width: self.filter_width,
            });
        }
        Ok((input_len - self.filter_width) / self.stride + 1)
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.filter_width * self.in_channels
    }
}

/// Trainable tensors of one temporal conv layer.
///
/// `weights` is `[out_channels x filter_width x in_channels]` row-major:
/// `weights[(o * k + j) * c_in + c]` multiplies input frame `s*t + j`,
/// channel `c`, for output channel `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(spec: &ConvSpec) -> Self {
        ConvParams {
            weights: vec![0.0; spec.weight_count()],
            bias: vec![0.0; spec.out_channels],
        }
    }

    /// Uniform init in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: &ConvSpec, rng: &mut impl Rng) -> Self {
        let fan_in = (spec.in_channels * spec.filter_width) as f64;
        let fan_out = (spec.out_channels * spec.filter_width) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let weights = (0..spec.weight_count())
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        ConvParams {
            weights,
            bias: vec![0.0; spec.out_channels],
        }
    }

    #[inline]
    pub fn weight(&self, spec: &ConvSpec, o: usize, j: usize, c: usize) -> f64 {
        self.weights[(o * spec.filter_width + j) * spec.in_channels + c]
    }

    fn check_shapes(&self, spec: &ConvSpec) -> Result<()> {
        if self.weights.len() != spec.weight_count() || self.bias.len() != spec.out_channels {
            return Err(Error::ShapeMismatch {
                what: "ConvParams",
                expected: format!("{} weights, {} biases", spec.weight_count(), spec.out_channels),
                actual: format!("{} weights, {} biases", self.weights.len(), self.bias.len()),
            });
        }
        Ok(())
    }
}

/// Gradients of a conv layer, shaped like its inputs.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub wrt_input: Tensor2,
    pub wrt_weights: Vec<f64>,
    pub wrt_bias: Vec<f64>,
}

/// Valid temporal convolution:
/// `y[t, o] = bias[o] + sum_j sum_c weights[o, j, c] * x[s*t + j, c]`.
///
/// Summation runs in ascending `(j, c)` order so results are reproducible
/// bit for bit.
pub fn temporal_conv_forward(x: &Tensor2, params: &ConvParams, spec: &ConvSpec) -> Result<Tensor2> {
    params.check_shapes(spec)?;
    if x.cols() != spec.in_channels {
        return Err(Error::ShapeMismatch {
            what: "temporal_conv_forward input",
            expected: format!("{} channels", spec.in_channels),
            actual: format!("{} channels", x.cols()),
        });
    }
    let out_len = spec.output_len(x.rows())?;
    let k = spec.filter_width;
    let c_in = spec.in_channels;

    let mut y = Tensor2::zeros(out_len, spec.out_channels);
    for t in 0..out_len {
        let start = spec.stride * t;
        for o in 0..spec.out_channels {
            let mut acc = params.bias[o];
            let w_base = o * k * c_in;
            for j in 0..k {
                let x_row = x.row(start + j);
                let w_row = &params.weights[w_base + j * c_in..w_base + (j + 1) * c_in];
                for c in 0..c_in {
                    acc += w_row[c] * x_row[c];
                }
            }
            y.set(t, o, acc);
        }
    }
    Ok(y)
}

/// Gradients of `temporal_conv_forward` given the upstream gradient of the
/// output (`[T' x out_channels]`).
pub fn temporal_conv_backward(
    x: &Tensor2,
    params: &ConvParams,
    spec: &ConvSpec,
    upstream: &Tensor2,
) -> Result<ConvGrads> {
    params.check_shapes(spec)?;
    let out_len = spec.output_len(x.rows())?;
    if upstream.rows() != out_len || upstream.cols() != spec.out_channels {
        return Err(Error::ShapeMismatch {
            what: "temporal_conv_backward upstream",
            expected: format!("{}x{}", out_len, spec.out_channels),
            actual: upstream.shape_string(),
        });
    }

    let k = spec.filter_width;
    let c_in = spec.in_channels;
    let mut grad_x = Tensor2::zeros(x.rows(), c_in);
    let mut grad_w = vec![0.0; spec.weight_count()];
    let mut grad_b = vec![0.0; spec.out_channels];

    for t in 0..out_len {
        let start = spec.stride * t;
        for o in 0..spec.out_channels {
            let g = upstream.get(t, o);
            grad_b[o] += g;
            let w_base = o * k * c_in;
            for j in 0..k {
                let x_row = x.row(start + j);
                let gx_row = grad_x.row_mut(start + j);
                let w_row = &params.weights[w_base + j * c_in..w_base + (j + 1) * c_in];
                let gw_row = &mut grad_w[w_base + j * c_in..w_base + (j + 1) * c_in];
                for c in 0..c_in {
                    gw_row[c] += g * x_row[c];
                    gx_row[c] += g * w_row[c];
                }
            }
        }
    }

    Ok(ConvGrads {
        wrt_input: grad_x,
        wrt_weights: grad_w,
        wrt_bias: grad_b,
    })
}
