use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::config::{EncoderConfig, EncoderKind};
use crate::numcore::{AffineParams, ConvParams};

/// Trainable tensors of the conv encoder path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvEncoderParams {
    pub conv1: ConvParams,
    pub conv_res: Option<ConvParams>,
}

/// Encoder parameters; the variant fixes which encoder the model uses.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderParams {
    Conv(ConvEncoderParams),
    AvgPool,
}

/// Logistic regression head combining the CF score with the user's
/// frequency and recency features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticHead {
    pub w_score: f64,
    pub w_frequency: f64,
    pub w_recency: f64,
    pub bias: f64,
}

impl LogisticHead {
    pub fn zeros() -> Self {
        LogisticHead {
            w_score: 0.0,
            w_frequency: 0.0,
            w_recency: 0.0,
            bias: 0.0,
        }
    }
}

/// All trainable tensors of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub mlp: Vec<AffineParams>,
    pub head: LogisticHead,
}

impl ModelParams {
    /// Seeded initialization: conv and MLP weights uniform in
    /// `+-sqrt(6/(fan_in+fan_out))`, all biases and the head at zero.
    pub fn init(config: &EncoderConfig, kind: EncoderKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(config, kind, &mut rng)
    }

    pub fn init_with_rng(config: &EncoderConfig, kind: EncoderKind, rng: &mut impl Rng) -> Self {
        let encoder = match kind {
            EncoderKind::Conv => EncoderParams::Conv(ConvEncoderParams {
                conv1: ConvParams::init(&config.conv1_spec(), rng),
                conv_res: config.residual_spec().map(|s| ConvParams::init(&s, rng)),
            }),
            EncoderKind::AvgPool => EncoderParams::AvgPool,
        };
        let mlp = config
            .mlp_dims(kind)
            .into_iter()
            .map(|(i, o)| AffineParams::init(i, o, rng))
            .collect();
        ModelParams {
            encoder,
            mlp,
            head: LogisticHead::zeros(),
        }
    }

    /// All-zero parameters with the same shapes (gradient container).
    pub fn zeros_like(&self) -> Self {
        let encoder = match &self.encoder {
            EncoderParams::Conv(c) => EncoderParams::Conv(ConvEncoderParams {
                conv1: ConvParams {
                    weights: vec![0.0; c.conv1.weights.len()],
                    bias: vec![0.0; c.conv1.bias.len()],
                },
                conv_res: c.conv_res.as_ref().map(|r| ConvParams {
                    weights: vec![0.0; r.weights.len()],
                    bias: vec![0.0; r.bias.len()],
                }),
            }),
            EncoderParams::AvgPool => EncoderParams::AvgPool,
        };
        let mlp = self
            .mlp
            .iter()
            .map(|l| AffineParams::zeros(l.in_dim, l.out_dim))
            .collect();
        ModelParams {
            encoder,
            mlp,
            head: LogisticHead::zeros(),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self.encoder {
            EncoderParams::Conv(_) => EncoderKind::Conv,
            EncoderParams::AvgPool => EncoderKind::AvgPool,
        }
    }

    fn head_as_array(&self) -> [f64; 4] {
        [
            self.head.w_score,
            self.head.w_frequency,
            self.head.w_recency,
            self.head.bias,
        ]
    }

    /// Visits every parameter slice in a fixed order shared by
    /// `flatten`/`assign_from_flat` and the SGD update.
    fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        if let EncoderParams::Conv(c) = &self.encoder {
            out.push(c.conv1.weights.as_slice());
            out.push(c.conv1.bias.as_slice());
            if let Some(r) = &c.conv_res {
                out.push(r.weights.as_slice());
                out.push(r.bias.as_slice());
            }
        }
        for l in &self.mlp {
            out.push(l.weights.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        if let EncoderParams::Conv(c) = &mut self.encoder {
            out.push(c.conv1.weights.as_mut_slice());
            out.push(c.conv1.bias.as_mut_slice());
            if let Some(r) = &mut c.conv_res {
                out.push(r.weights.as_mut_slice());
                out.push(r.bias.as_mut_slice());
            }
        }
        for l in &mut self.mlp {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum::<usize>() + 4
    }

    /// Every parameter as one vector (tensor slices in fixed order, then
    /// the four head values).
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for s in self.slices() {
            flat.extend_from_slice(s);
        }
        flat.extend_from_slice(&self.head_as_array());
        flat
    }

    /// Inverse of `flatten`; shapes must match.
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        self.head.w_score = flat[offset];
        self.head.w_frequency = flat[offset + 1];
        self.head.w_recency = flat[offset + 2];
        self.head.bias = flat[offset + 3];
    }

    /// `self += alpha * other`, elementwise over identically-shaped params.
    pub fn add_scaled(&mut self, other: &ModelParams, alpha: f64) {
        let theirs = other.slices();
        let mut ours = self.slices_mut();
        assert_eq!(ours.len(), theirs.len(), "parameter structure mismatch");
        for (a, b) in ours.iter_mut().zip(theirs) {
            assert_eq!(a.len(), b.len(), "parameter tensor shape mismatch");
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
        self.head.w_score += alpha * other.head.w_score;
        self.head.w_frequency += alpha * other.head.w_frequency;
        self.head.w_recency += alpha * other.head.w_recency;
        self.head.bias += alpha * other.head.bias;
    }

    /// Plain SGD update `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, grads: &ModelParams, learning_rate: f64) {
        self.add_scaled(grads, -learning_rate);
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
            && self.head_as_array().iter().all(|v| v.is_finite())
    }
}
