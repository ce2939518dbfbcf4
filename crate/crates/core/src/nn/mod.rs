//! Image encoder, attribute autoencoder, conditioning and OM decoder.
//!
//! The encoder is three blocks of 3x3 convolution + ReLU + 2x2 max-pool
//! followed by a linear projection to the embedding. No batch statistics are
//! used anywhere, so every forward pass is a pure per-sample function of the
//! parameters.

mod io;
pub mod layers;
mod model;
mod recon_head;

pub use io::{decode_bundle, encode_bundle, load_bundle, save_bundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use model::{
    condition, Architecture, AttrTrace, DecoderTrace, EncoderTrace, InputMode, ModelBundle,
    ModelConfig, ParamEntry,
};
pub use recon_head::{HeadTrace, ReconHead};
