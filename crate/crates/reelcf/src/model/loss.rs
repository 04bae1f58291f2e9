use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::config::EncoderConfig;
use crate::model::encoder::{encoder_backward, EncoderTrace};
use crate::model::params::ModelParams;
use crate::model::scoring::{attendance_logit, build_user_vector, cf_score, UserContext};
use crate::numcore::{sigmoid_bce, Tensor2};
use crate::MovieId;

/// One labeled training example: a user, a candidate movie, and whether the
/// user attended it.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub user: &'a UserContext,
    pub movie: &'a MovieId,
    pub label: bool,
}

/// Mean loss over a batch plus gradients for every trainable tensor.
#[derive(Debug)]
pub struct LossOutput {
    pub mean_loss: f64,
    pub grads: ModelParams,
}

/// Mean binary cross-entropy over the batch with the full backward pass.
///
/// Every movie touched by the batch (targets and attendances) is encoded
/// exactly once; gradients flow through the logistic head, the CF score,
/// the user vector into every attended movie's encoding, and the target
/// movie's encoding. Movie gradient accumulation and backprop run in
/// sorted movie order so results are bit-reproducible.
pub fn forward_loss(
    batch: &[BatchItem<'_>],
    params: &ModelParams,
    config: &EncoderConfig,
    features: &BTreeMap<MovieId, Tensor2>,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = config.movie_vector_dim(params.kind());

    // Encode each referenced movie once.
    let mut encoded: BTreeMap<&MovieId, (Vec<f64>, EncoderTrace)> = BTreeMap::new();
    for item in batch {
        for movie in std::iter::once(item.movie).chain(item.user.attended.iter()) {
            if !encoded.contains_key(movie) {
                let frames = features
                    .get(movie)
                    .ok_or_else(|| Error::MissingFeatures(movie.clone()))?;
                encoded.insert(movie, params.encode(frames, config)?);
            }
        }
    }
    let movie_vectors: BTreeMap<MovieId, Vec<f64>> = encoded
        .iter()
        .map(|(id, (v, _))| ((*id).clone(), v.clone()))
        .collect();

    let mut grads = params.zeros_like();
    let mut d_vectors: BTreeMap<&MovieId, Vec<f64>> = BTreeMap::new();
    let inv_n = 1.0 / batch.len() as f64;
    let mut loss_sum = 0.0;

    for item in batch {
        let target_vec = &movie_vectors[item.movie];
        let user_vec = build_user_vector(item.user, &movie_vectors, item.movie, dim)?;
        let score = cf_score(&user_vec, target_vec);
        let logit = attendance_logit(score, item.user.frequency, item.user.recency, &params.head);
        let bce = sigmoid_bce(logit, item.label);
        loss_sum += bce.loss;

        let d_logit = bce.dloss_dlogit * inv_n;
        grads.head.w_score += d_logit * score;
        grads.head.w_frequency += d_logit * item.user.frequency;
        grads.head.w_recency += d_logit * item.user.recency;
        grads.head.bias += d_logit;

        let d_score = d_logit * params.head.w_score;
        if d_score != 0.0 {
            // d/dv_target = d_score * u; d/dv_m = d_score * v_target for
            // every attended movie m != target.
            let d_target = d_vectors
                .entry(item.movie)
                .or_insert_with(|| vec![0.0; dim]);
            for (acc, u) in d_target.iter_mut().zip(&user_vec) {
                *acc += d_score * u;
            }
            for movie in &item.user.attended {
                if movie == item.movie {
                    continue;
                }
                let d_m = d_vectors.entry(movie).or_insert_with(|| vec![0.0; dim]);
                for (acc, v) in d_m.iter_mut().zip(target_vec) {
                    *acc += d_score * v;
                }
            }
        }
    }

    for (movie, d_vec) in &d_vectors {
        let (_, trace) = &encoded[*movie];
        encoder_backward(params, config, trace, d_vec, &mut grads)?;
    }

    Ok(LossOutput {
        mean_loss: loss_sum * inv_n,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::EncoderKind;
    use crate::numcore::{grad_check, GRADCHECK_EPS};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_world(
        config: &EncoderConfig,
        seed: u64,
    ) -> (BTreeMap<MovieId, Tensor2>, Vec<UserContext>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let movies = ["m1", "m2", "m3"];
        let features = movies
            .iter()
            .map(|m| {
                (
                    m.to_string(),
                    Tensor2::from_fn(config.max_frames, config.feature_dim, |_, _| {
                        rng.random_range(-1.0..1.0)
                    }),
                )
            })
            .collect();

        let mut u1 = UserContext::new("u1".into());
        u1.attended = vec!["m1".into(), "m2".into()];
        u1.frequency = 0.4;
        u1.recency = 0.2;
        let mut u2 = UserContext::new("u2".into());
        u2.attended = vec!["m3".into()];
        u2.frequency = 0.1;
        u2.recency = 0.9;
        (features, vec![u1, u2])
    }

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            feature_dim: 4,
            max_frames: 9,
            conv_out_channels: 3,
            filter_width: 3,
            stride: 2,
            residual_filter_width: Some(1),
            residual_skip: true,
            mlp_layer_widths: vec![3],
        }
    }

    #[test]
    fn empty_batch_is_rejected() {
        let cfg = tiny_config();
        let params = ModelParams::init(&cfg, EncoderKind::Conv, 0);
        let features = BTreeMap::new();
        assert!(matches!(
            forward_loss(&[], &params, &cfg, &features),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn zero_parameters_give_ln2_loss() {
        let cfg = tiny_config();
        let (features, users) = tiny_world(&cfg, 7);
        let params = ModelParams::init(&cfg, EncoderKind::Conv, 0).zeros_like();
        let m2 = "m2".to_string();
        let m3 = "m3".to_string();
        let batch = vec![
            BatchItem {
                user: &users[0],
                movie: &m3,
                label: true,
            },
            BatchItem {
                user: &users[1],
                movie: &m2,
                label: false,
            },
        ];
        let out = forward_loss(&batch, &params, &cfg, &features).unwrap();
        assert!((out.mean_loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicating_batch_items_keeps_mean_loss() {
        let cfg = tiny_config();
        let (features, users) = tiny_world(&cfg, 9);
        let params = ModelParams::init(&cfg, EncoderKind::Conv, 31);
        let m1 = "m1".to_string();
        let m3 = "m3".to_string();
        let base = vec![
            BatchItem {
                user: &users[0],
                movie: &m3,
                label: true,
            },
            BatchItem {
                user: &users[1],
                movie: &m1,
                label: false,
            },
        ];
        let mut doubled = base.clone();
        doubled.extend(base.iter().copied());

        let a = forward_loss(&base, &params, &cfg, &features).unwrap();
        let b = forward_loss(&doubled, &params, &cfg, &features).unwrap();
        assert!((a.mean_loss - b.mean_loss).abs() < 1e-12);
        // Mean gradients are likewise unchanged.
        for (x, y) in a.grads.flatten().iter().zip(b.grads.flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// Full-composite gradient check on a 2-user, 3-movie desk instance:
    /// every parameter of the conv encoder, MLP, and head against central
    /// differences.
    #[test]
    fn composite_gradients_match_finite_differences() {
        for (kind, seed) in [(EncoderKind::Conv, 11u64), (EncoderKind::AvgPool, 12u64)] {
            let cfg = tiny_config();
            let (features, users) = tiny_world(&cfg, 40 + seed);
            let mut params = ModelParams::init(&cfg, kind, seed);
            // A nonzero head so gradients reach the encoders.
            params.head.w_score = 0.7;
            params.head.w_frequency = -0.3;
            params.head.w_recency = 0.5;
            params.head.bias = 0.1;

            let m1 = "m1".to_string();
            let m2 = "m2".to_string();
            let m3 = "m3".to_string();
            let batch = vec![
                BatchItem {
                    user: &users[0],
                    movie: &m3,
                    label: true,
                },
                BatchItem {
                    user: &users[0],
                    movie: &m2,
                    label: false,
                },
                BatchItem {
                    user: &users[1],
                    movie: &m1,
                    label: true,
                },
            ];

            let out = forward_loss(&batch, &params, &cfg, &features).unwrap();
            let flat = params.flatten();
            let template = params.clone();
            let err = grad_check(
                |v: &[f64]| {
                    let mut p = template.clone();
                    p.assign_from_flat(v);
                    forward_loss(&batch, &p, &cfg, &features).unwrap().mean_loss
                },
                &flat,
                &out.grads.flatten(),
                GRADCHECK_EPS,
            );
            assert!(
                err < 1e-4,
                "{kind:?} composite gradcheck rel err {err} (seed {seed})"
            );
        }
    }
}
