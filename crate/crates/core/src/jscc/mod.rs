//! The learned transceiver: patch layout, ViT encoder/decoder, the
//! differentiable link, training and evaluation.

mod config;
mod eval;
mod gradcheck;
mod layout;
mod model;
mod pipeline;
mod train;

pub use config::{channel_uses, ModelConfig, SnrSpec};
pub use eval::{evaluate_model, EvalOptions, EvalStats, EVAL_STREAM};
pub use gradcheck::{gradcheck_suite, GradCheckCase};
pub use layout::{
    from_packed, mse_loss, pack_symbols, patchify, power_normalize, to_packed, unpack_symbols,
    unpatchify, Image,
};
pub use model::{
    decode, encode, encode_with_positions, init_params, residual_compensation, transformer_layer,
    LN_EPS, RESIDUAL_HIDDEN,
};
pub use pipeline::{
    forward_image, reconstruct, ChannelSampler, Forward, IdentityChannel, LinkDraw, PowerStats,
    RayleighChannel, Reconstruction, POWER_TOL,
};
pub use train::{
    initial_params, train, train_step, HistoryRow, TrainConfig, TrainHistory, INIT_STREAM,
    TRAIN_STREAM,
};
