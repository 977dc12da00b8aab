//! Dense reverse-mode kernel for the layer set the victim models need.
//!
//! Layers hold [`ParamId`] handles into a [`ParamStore`]; forward passes
//! return explicit caches and backward passes accumulate parameter gradients
//! into a [`Grads`] buffer aligned with the store. Passing `None` for the
//! buffer skips parameter gradients (attack-time input gradients only).

mod adam;
mod layers;
mod loss;
mod param;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use layers::{
    gelu, gelu_grad, positional_encoding, Attention, AttentionCache, DecoderCache, DecoderLayer,
    EncoderCache, EncoderLayer, FeedForward, FeedForwardCache, LayerNorm, LayerNormCache, Linear,
    NEG_MASK,
};
pub use loss::{log_softmax, softmax, softmax_cross_entropy};
pub use param::{Grads, Param, ParamId, ParamStore};
pub use tape::Tape;
pub use tensor::{matmul, matmul_at_acc, matmul_bt, Tensor};
