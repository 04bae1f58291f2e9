use crate::error::{Error, Result};
use crate::model::config::EncoderConfig;
use crate::model::params::{ConvEncoderParams, EncoderParams, ModelParams};
use crate::numcore::{
    affine_backward, affine_forward, avg_pool_time, avg_pool_time_backward, relu, relu_backward,
    relu_backward_slice, relu_slice, temporal_conv_backward, temporal_conv_forward, AffineParams,
    Tensor2,
};

/// Intermediates of one MLP forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// Input to each layer (first entry is the pooled vector).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-relu output of each hidden layer (the final layer has no relu).
    hidden_pre: Vec<Vec<f64>>,
}

fn mlp_forward(pooled: Vec<f64>, layers: &[AffineParams]) -> Result<(Vec<f64>, MlpTrace)> {
    let mut trace = MlpTrace {
        layer_inputs: Vec::with_capacity(layers.len()),
        hidden_pre: Vec::with_capacity(layers.len().saturating_sub(1)),
    };
    let mut current = pooled;
    for (i, layer) in layers.iter().enumerate() {
        trace.layer_inputs.push(current.clone());
        let pre = affine_forward(&current, layer)?;
        if i + 1 < layers.len() {
            trace.hidden_pre.push(pre.clone());
            current = relu_slice(&pre);
        } else {
            current = pre;
        }
    }
    Ok((current, trace))
}

/// Backpropagates through the MLP, accumulating parameter gradients into
/// `grads` and returning the gradient with respect to the pooled input.
fn mlp_backward(
    trace: &MlpTrace,
    layers: &[AffineParams],
    grads: &mut [AffineParams],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let mut d_out = upstream.to_vec();
    for i in (0..layers.len()).rev() {
        let d_pre = if i + 1 < layers.len() {
            relu_backward_slice(&trace.hidden_pre[i], &d_out)
        } else {
            d_out.clone()
        };
        let g = affine_backward(&trace.layer_inputs[i], &layers[i], &d_pre)?;
        for (acc, v) in grads[i].weights.iter_mut().zip(&g.wrt_weights) {
            *acc += v;
        }
        for (acc, v) in grads[i].bias.iter_mut().zip(&g.wrt_bias) {
            *acc += v;
        }
        d_out = g.wrt_input;
    }
    Ok(d_out)
}

/// Intermediates of one conv-encoder forward pass, kept for backward.
#[derive(Debug, Clone)]
pub struct ConvTrace {
    input: Tensor2,
    pre1: Tensor2,
    h1: Tensor2,
    /// Pre-relu input of the final relu when the second conv layer exists.
    pre2: Option<Tensor2>,
    final_rows: usize,
    mlp: MlpTrace,
}

/// Intermediates of one avg-pool-encoder forward pass.
#[derive(Debug, Clone)]
pub struct AvgPoolTrace {
    rows: usize,
    mlp: MlpTrace,
}

#[derive(Debug, Clone)]
pub enum EncoderTrace {
    Conv(ConvTrace),
    AvgPool(AvgPoolTrace),
}

fn check_frames(frames: &Tensor2, config: &EncoderConfig) -> Result<()> {
    if frames.rows() != config.max_frames || frames.cols() != config.feature_dim {
        return Err(Error::ShapeMismatch {
            what: "encoder input frames",
            expected: format!("{}x{}", config.max_frames, config.feature_dim),
            actual: frames.shape_string(),
        });
    }
    Ok(())
}

/// Runs the conv stack up to the sequence entering average pooling
/// (the output of the last relu).
pub fn conv_sequence_forward(
    frames: &Tensor2,
    encoder: &ConvEncoderParams,
    config: &EncoderConfig,
) -> Result<Tensor2> {
    check_frames(frames, config)?;
    let pre1 = temporal_conv_forward(frames, &encoder.conv1, &config.conv1_spec())?;
    let h1 = relu(&pre1);
    match (&encoder.conv_res, config.residual_spec()) {
        (Some(res), Some(spec)) => {
            let r = temporal_conv_forward(&h1, res, &spec)?;
            let pre2 = if config.skip_active() { h1.add(&r) } else { r };
            Ok(relu(&pre2))
        }
        (None, None) => Ok(h1),
        _ => Err(Error::ShapeMismatch {
            what: "residual layer",
            expected: format!("configured: {:?}", config.residual_filter_width),
            actual: format!("params present: {}", encoder.conv_res.is_some()),
        }),
    }
}

/// Conv movie encoder: strided temporal conv, optional width-1 residual
/// conv with skip, relu, average pooling over time, then the MLP.
pub fn encode_movie_conv(
    frames: &Tensor2,
    encoder: &ConvEncoderParams,
    mlp: &[AffineParams],
    config: &EncoderConfig,
) -> Result<(Vec<f64>, ConvTrace)> {
    check_frames(frames, config)?;
    let pre1 = temporal_conv_forward(frames, &encoder.conv1, &config.conv1_spec())?;
    let h1 = relu(&pre1);
    let (h2, pre2) = match (&encoder.conv_res, config.residual_spec()) {
        (Some(res), Some(spec)) => {
            let r = temporal_conv_forward(&h1, res, &spec)?;
            let pre2 = if config.skip_active() { h1.add(&r) } else { r };
            (relu(&pre2), Some(pre2))
        }
        (None, None) => (h1.clone(), None),
        _ => {
            return Err(Error::ShapeMismatch {
                what: "residual layer",
                expected: format!("configured: {:?}", config.residual_filter_width),
                actual: format!("params present: {}", encoder.conv_res.is_some()),
            })
        }
    };
    let pooled = avg_pool_time(&h2);
    let final_rows = h2.rows();
    let (vector, mlp_trace) = mlp_forward(pooled, mlp)?;
    Ok((
        vector,
        ConvTrace {
            input: frames.clone(),
            pre1,
            h1,
            pre2,
            final_rows,
            mlp: mlp_trace,
        },
    ))
}

/// Baseline movie encoder: average pooling straight over the input frames,
/// then the MLP. No conv layers, so the output is invariant to any
/// permutation of the frames.
pub fn encode_movie_avgpool(
    frames: &Tensor2,
    mlp: &[AffineParams],
    config: &EncoderConfig,
) -> Result<(Vec<f64>, AvgPoolTrace)> {
    check_frames(frames, config)?;
    let pooled = avg_pool_time(frames);
    let (vector, mlp_trace) = mlp_forward(pooled, mlp)?;
    Ok((
        vector,
        AvgPoolTrace {
            rows: frames.rows(),
            mlp: mlp_trace,
        },
    ))
}

impl ModelParams {
    /// Encodes one movie with whichever encoder these parameters belong to.
    pub fn encode(
        &self,
        frames: &Tensor2,
        config: &EncoderConfig,
    ) -> Result<(Vec<f64>, EncoderTrace)> {
        match &self.encoder {
            EncoderParams::Conv(c) => {
                let (v, t) = encode_movie_conv(frames, c, &self.mlp, config)?;
                Ok((v, EncoderTrace::Conv(t)))
            }
            EncoderParams::AvgPool => {
                let (v, t) = encode_movie_avgpool(frames, &self.mlp, config)?;
                Ok((v, EncoderTrace::AvgPool(t)))
            }
        }
    }

    /// Encodes one movie, discarding the backward trace.
    pub fn encode_vector(&self, frames: &Tensor2, config: &EncoderConfig) -> Result<Vec<f64>> {
        Ok(self.encode(frames, config)?.0)
    }
}

/// Backpropagates `upstream` (gradient with respect to the movie vector)
/// through the encoder, accumulating parameter gradients into `grads`.
pub fn encoder_backward(
    params: &ModelParams,
    config: &EncoderConfig,
    trace: &EncoderTrace,
    upstream: &[f64],
    grads: &mut ModelParams,
) -> Result<()> {
    match (trace, &params.encoder, &mut grads.encoder) {
        (EncoderTrace::AvgPool(t), EncoderParams::AvgPool, EncoderParams::AvgPool) => {
            // Input frames are data, not parameters: stop at the pooled vector.
            mlp_backward(&t.mlp, &params.mlp, &mut grads.mlp, upstream)?;
            Ok(())
        }
        (EncoderTrace::Conv(t), EncoderParams::Conv(p), EncoderParams::Conv(g)) => {
            let d_pooled = mlp_backward(&t.mlp, &params.mlp, &mut grads.mlp, upstream)?;
            let d_h2 = avg_pool_time_backward(t.final_rows, &d_pooled);

            let d_h1 = match (&t.pre2, &p.conv_res, config.residual_spec()) {
                (Some(pre2), Some(res), Some(spec)) => {
                    let d_pre2 = relu_backward(pre2, &d_h2);
                    let conv_grads = temporal_conv_backward(&t.h1, res, &spec, &d_pre2)?;
                    let g_res = g.conv_res.as_mut().expect("gradient shape mismatch");
                    for (acc, v) in g_res.weights.iter_mut().zip(&conv_grads.wrt_weights) {
                        *acc += v;
                    }
                    for (acc, v) in g_res.bias.iter_mut().zip(&conv_grads.wrt_bias) {
                        *acc += v;
                    }
                    if config.skip_active() {
                        // pre2 = h1 + conv_res(h1): the skip adds d_pre2 directly.
                        conv_grads.wrt_input.add(&d_pre2)
                    } else {
                        conv_grads.wrt_input
                    }
                }
                (None, None, None) => d_h2,
                _ => {
                    return Err(Error::ShapeMismatch {
                        what: "residual layer backward",
                        expected: format!("configured: {:?}", config.residual_filter_width),
                        actual: "trace/params disagree".to_string(),
                    })
                }
            };

            let d_pre1 = relu_backward(&t.pre1, &d_h1);
            let conv_grads =
                temporal_conv_backward(&t.input, &p.conv1, &config.conv1_spec(), &d_pre1)?;
            for (acc, v) in g.conv1.weights.iter_mut().zip(&conv_grads.wrt_weights) {
                *acc += v;
            }
            for (acc, v) in g.conv1.bias.iter_mut().zip(&conv_grads.wrt_bias) {
                *acc += v;
            }
            Ok(())
        }
        _ => Err(Error::ShapeMismatch {
            what: "encoder_backward",
            expected: "trace matching the encoder parameters".to_string(),
            actual: "mismatched encoder kinds".to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::EncoderKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_frames(config: &EncoderConfig, rng: &mut impl Rng) -> Tensor2 {
        Tensor2::from_fn(config.max_frames, config.feature_dim, |_, _| {
            rng.random_range(-1.0..1.0)
        })
    }

    #[test]
    fn conv_path_timestep_counts() {
        let cfg = EncoderConfig::default(); // 120 frames, k=8, s=2
        assert_eq!(cfg.conv_output_len(), 57);
        let desk = EncoderConfig::desk_scale(); // 42 frames
        assert_eq!(desk.conv_output_len(), 18);
        assert_eq!(desk.final_timesteps(), 18);
    }

    #[test]
    fn zero_parameters_give_zero_vector_with_identity_mlp() {
        let cfg = EncoderConfig::desk_scale();
        let mut params = ModelParams::init(&cfg, EncoderKind::Conv, 5);
        let zero = params.zeros_like();
        params = zero;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = random_frames(&cfg, &mut rng);
        let v = params.encode_vector(&frames, &cfg).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_residual_weights_match_single_layer_encoder() {
        let cfg = EncoderConfig::desk_scale();
        let single = EncoderConfig {
            residual_filter_width: None,
            ..cfg.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames = random_frames(&cfg, &mut rng);

        let with_res = ModelParams::init(&cfg, EncoderKind::Conv, 17);
        let mut zeroed = with_res.clone();
        if let EncoderParams::Conv(c) = &mut zeroed.encoder {
            let res = c.conv_res.as_mut().unwrap();
            res.weights.iter_mut().for_each(|w| *w = 0.0);
            res.bias.iter_mut().for_each(|b| *b = 0.0);
        }

        let mut without = ModelParams::init(&single, EncoderKind::Conv, 99);
        if let (EncoderParams::Conv(a), EncoderParams::Conv(b)) =
            (&zeroed.encoder, &mut without.encoder)
        {
            b.conv1 = a.conv1.clone();
        }

        let v1 = zeroed.encode_vector(&frames, &cfg).unwrap();
        let v2 = without.encode_vector(&frames, &single).unwrap();
        for (a, b) in v1.iter().zip(&v2) {
            assert_eq!(a, b, "skip with zero residual must be exact passthrough");
        }
    }

    #[test]
    fn width_one_residual_equals_shared_affine_per_timestep() {
        // A 1-frame conv applied along time is one fully-connected layer
        // applied to each timestep independently.
        let cfg = EncoderConfig::desk_scale();
        let params = ModelParams::init(&cfg, EncoderKind::Conv, 23);
        let EncoderParams::Conv(conv) = &params.encoder else {
            unreachable!()
        };
        let res = conv.conv_res.as_ref().unwrap();
        let spec = cfg.residual_spec().unwrap();
        assert_eq!(spec.filter_width, 1);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h1 = Tensor2::from_fn(11, cfg.conv_out_channels, |_, _| rng.random_range(-1.0..1.0));
        let conv_out = temporal_conv_forward(&h1, res, &spec).unwrap();

        let affine = AffineParams {
            in_dim: cfg.conv_out_channels,
            out_dim: cfg.conv_out_channels,
            weights: res.weights.clone(),
            bias: res.bias.clone(),
        };
        for t in 0..h1.rows() {
            let per_step = affine_forward(h1.row(t), &affine).unwrap();
            for (a, b) in conv_out.row(t).iter().zip(&per_step) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn avgpool_encoder_ignores_frame_order_conv_does_not() {
        let cfg = EncoderConfig::desk_scale();
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let conv = ModelParams::init(&cfg, EncoderKind::Conv, 2000 + seed);
            let pool = ModelParams::init(&cfg, EncoderKind::AvgPool, 2000 + seed);
            // Pairwise-distinct frames so transpositions are visible.
            let frames = Tensor2::from_fn(cfg.max_frames, cfg.feature_dim, |r, c| {
                (r * cfg.feature_dim + c) as f64 * 1e-3 + rng.random_range(-0.4..0.4)
            });

            let conv_base = conv.encode_vector(&frames, &cfg).unwrap();
            let pool_base = pool.encode_vector(&frames, &cfg).unwrap();

            let mut conv_changed = 0.0f64;
            for _ in 0..10 {
                let i = rng.random_range(0..cfg.max_frames - 1);
                let mut rows: Vec<Vec<f64>> =
                    (0..frames.rows()).map(|r| frames.row(r).to_vec()).collect();
                rows.swap(i, i + 1);
                let permuted = Tensor2::from_rows(&rows);

                let pool_v = pool.encode_vector(&permuted, &cfg).unwrap();
                for (a, b) in pool_v.iter().zip(&pool_base) {
                    assert_eq!(a, b, "avg-pool encoder must be permutation invariant");
                }

                let conv_v = conv.encode_vector(&permuted, &cfg).unwrap();
                let diff = conv_v
                    .iter()
                    .zip(&conv_base)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                conv_changed = conv_changed.max(diff);
            }
            assert!(
                conv_changed > 1e-8,
                "seed {seed}: conv encoder ignored all 10 adjacent transpositions"
            );
        }
    }

    #[test]
    fn rejects_wrong_frame_shape() {
        let cfg = EncoderConfig::desk_scale();
        let params = ModelParams::init(&cfg, EncoderKind::Conv, 1);
        let bad = Tensor2::zeros(cfg.max_frames - 1, cfg.feature_dim);
        assert!(params.encode_vector(&bad, &cfg).is_err());
    }
}
