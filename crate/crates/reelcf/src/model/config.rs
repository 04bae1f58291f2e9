use crate::error::{Error, Result};
use crate::numcore::ConvSpec;

/// Which movie encoder produces the movie vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Strided temporal convolution stack over frame features.
    Conv,
    /// Order-destroying temporal mean of frame features.
    AvgPool,
}

impl EncoderKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "conv" => Ok(EncoderKind::Conv),
            "avgpool" => Ok(EncoderKind::AvgPool),
            other => Err(Error::Config(format!(
                "unknown encoder {other:?} (expected conv or avgpool)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Conv => "conv",
            EncoderKind::AvgPool => "avgpool",
        }
    }
}

/// Architecture of the movie encoders.
///
/// The conv path is `relu(conv1(x))` followed by an optional second conv
/// layer of width `residual_filter_width` and stride 1. When that width is 1
/// and `residual_skip` is set, the second layer's output is added back onto
/// its input before the final relu; a width above 1 shrinks the time axis,
/// so the skip is dropped automatically. Average pooling over time and the
/// MLP produce the movie vector. The avg-pool path skips both conv layers.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Per-frame feature dimension (input channels).
    pub feature_dim: usize,
    /// Fixed sequence length every trailer is normalized to.
    pub max_frames: usize,
    /// Output channels of the first conv layer (and of the residual layer).
    pub conv_out_channels: usize,
    /// Temporal width of the first conv layer.
    pub filter_width: usize,
    /// Temporal stride of the first conv layer.
    pub stride: usize,
    /// Width of the second conv layer; `None` drops the layer entirely.
    pub residual_filter_width: Option<usize>,
    /// Add the second conv layer's input back onto its output (width 1 only).
    pub residual_skip: bool,
    /// Output widths of the MLP layers applied after pooling; hidden layers
    /// are affine+relu, the final layer affine only. Empty means identity.
    pub mlp_layer_widths: Vec<usize>,
}

impl Default for EncoderConfig {
    /// Production-scale default: 120 frames at 1 fps, 1024-dim frame
    /// features, 1024 filters of width 8 at stride 2, width-1 residual
    /// layer with skip, identity MLP.
    fn default() -> Self {
        EncoderConfig {
            feature_dim: 1024,
            max_frames: 120,
            conv_out_channels: 1024,
            filter_width: 8,
            stride: 2,
            residual_filter_width: Some(1),
            residual_skip: true,
            mlp_layer_widths: Vec::new(),
        }
    }
}

impl EncoderConfig {
    /// Small configuration sized for tests and the synthetic corpus.
    pub fn desk_scale() -> Self {
        EncoderConfig {
            feature_dim: 32,
            max_frames: 42,
            conv_out_channels: 16,
            filter_width: 8,
            stride: 2,
            residual_filter_width: Some(1),
            residual_skip: true,
            mlp_layer_widths: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.feature_dim == 0 || self.conv_out_channels == 0 {
            return bad("feature_dim and conv_out_channels must be >= 1".into());
        }
        if self.max_frames == 0 || self.filter_width == 0 || self.stride == 0 {
            return bad("max_frames, filter_width, and stride must be >= 1".into());
        }
        if self.filter_width > self.max_frames {
            return bad(format!(
                "filter_width {} exceeds max_frames {}",
                self.filter_width, self.max_frames
            ));
        }
        if let Some(w) = self.residual_filter_width {
            if w == 0 {
                return bad("residual_filter_width must be >= 1 when present".into());
            }
            if w > self.conv_output_len() {
                return bad(format!(
                    "residual_filter_width {} exceeds the {} conv output timesteps",
                    w,
                    self.conv_output_len()
                ));
            }
        }
        if self.mlp_layer_widths.iter().any(|&w| w == 0) {
            return bad("mlp_layer_widths entries must be >= 1".into());
        }
        Ok(())
    }

    pub fn conv1_spec(&self) -> ConvSpec {
        ConvSpec::new(
            self.feature_dim,
            self.conv_out_channels,
            self.filter_width,
            self.stride,
        )
    }

    /// Spec of the second conv layer, if configured. Stride is always 1.
    pub fn residual_spec(&self) -> Option<ConvSpec> {
        self.residual_filter_width
            .map(|w| ConvSpec::new(self.conv_out_channels, self.conv_out_channels, w, 1))
    }

    /// Timesteps after the first conv layer.
    pub fn conv_output_len(&self) -> usize {
        (self.max_frames - self.filter_width) / self.stride + 1
    }

    /// Timesteps entering average pooling, after both conv layers.
    pub fn final_timesteps(&self) -> usize {
        match self.residual_filter_width {
            Some(w) => self.conv_output_len() - (w - 1),
            None => self.conv_output_len(),
        }
    }

    /// The skip connection requires matching shapes, so it is active only
    /// for a width-1 second layer.
    pub fn skip_active(&self) -> bool {
        self.residual_skip && self.residual_filter_width == Some(1)
    }

    /// Dimension entering the MLP for the given encoder.
    pub fn pooled_dim(&self, kind: EncoderKind) -> usize {
        match kind {
            EncoderKind::Conv => self.conv_out_channels,
            EncoderKind::AvgPool => self.feature_dim,
        }
    }

    /// Dimension of the movie vector for the given encoder.
    pub fn movie_vector_dim(&self, kind: EncoderKind) -> usize {
        self.mlp_layer_widths
            .last()
            .copied()
            .unwrap_or_else(|| self.pooled_dim(kind))
    }

    /// `(in_dim, out_dim)` of each MLP layer for the given encoder.
    pub fn mlp_dims(&self, kind: EncoderKind) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.mlp_layer_widths.len());
        let mut prev = self.pooled_dim(kind);
        for &w in &self.mlp_layer_widths {
            dims.push((prev, w));
            prev = w;
        }
        dims
    }
}

/// Span of input frames that influence one output position of the conv
/// stack: `[s*t, s*(t + k2 - 1) + k - 1]` with a width-`k2` second layer,
/// collapsing to `[s*t, s*t + k - 1]` when the second layer is absent or
/// width 1.
pub fn receptive_field(config: &EncoderConfig, t: usize) -> (usize, usize) {
    let k = config.filter_width;
    let s = config.stride;
    let k2 = config.residual_filter_width.unwrap_or(1);
    let first = s * t;
    let last = s * (t + k2 - 1) + k - 1;
    debug_assert!(
        last < config.max_frames,
        "receptive field for t={t} exceeds the input"
    );
    (first, last)
}
