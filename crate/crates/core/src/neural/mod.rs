//! Recurrent encoder-decoder with additive attention and a copy gate, decoded
//! iteratively: each extraction is appended to the input before the next is generated.
//!
//! The encoder is a bidirectional gated recurrent cell over embeddings. The decoder is
//! initialized from the `[CLS]` state and receives the previous token embedding and
//! the previous context vector at every step. The output mixes a softmax over the
//! vocabulary with the attention weights of matching input words, weighted by a
//! sigmoid gate. Gradients are computed by hand.

pub mod checkpoint;
mod decode;
mod gru;
pub mod linalg;
mod model;
mod params;
mod train;
pub mod vocab;

pub use decode::{
    capped_memory, export_attention, write_attention_csv, DecodeConfig, Decoded, Generation, Iteration,
    StopReason,
};
pub use model::{DecodeState, Encoded, Model, StepDistribution};
pub use params::{GruParams, ModelConfig, ModelParams};
pub use train::{batch_gradient, corpus_loss, train, TrainConfig, TrainReport};
pub use vocab::Vocab;
