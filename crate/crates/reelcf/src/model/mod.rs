//! The two movie encoders (temporal-conv and avg-pool baseline), user
//! vectors, CF scoring, and the logistic attendance head, composed into one
//! differentiable forward/backward pass.

mod config;
mod encoder;
mod loss;
mod params;
mod scoring;

pub use config::{receptive_field, EncoderConfig, EncoderKind};
pub use encoder::{
    conv_sequence_forward, encode_movie_avgpool, encode_movie_conv, encoder_backward,
    AvgPoolTrace, ConvTrace, EncoderTrace,
};
pub use loss::{forward_loss, BatchItem, LossOutput};
pub use params::{ConvEncoderParams, EncoderParams, LogisticHead, ModelParams};
pub use scoring::{
    attendance_logit, build_user_vector, cf_score, predict_attendance, UserContext,
};
