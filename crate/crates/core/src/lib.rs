//! Iterative-memory open information extraction.
//!
//! * [`tuple`]: tokens, sentences, extractions and the memory-input encoding.
//! * [`ingest`]: extractor TSV files, per-sentence pools, random bootstrapping.
//! * [`qpbo`]: roof-duality minimization of quadratic pseudo-boolean functions.
//! * [`filter`]: score-and-filter aggregation of pooled extractions.
//! * [`train_data`]: iterative-memory training instances.
//! * [`neural`]: a small recurrent encoder-decoder with attention and copy.
//! * [`eval`]: P-R curve metrics and redundancy metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix the
//! common choice.

pub mod error;
pub mod eval;
pub mod filter;
pub mod ingest;
pub mod neural;
pub mod qpbo;
pub mod scalar;
pub mod synth;
pub mod train_data;
pub mod tuple;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PseudoBooleanFunction64 = qpbo::PseudoBooleanFunction<f64>;
pub type PseudoBooleanFunction32 = qpbo::PseudoBooleanFunction<f32>;
pub type FlowNetwork64 = qpbo::FlowNetwork<f64>;
pub type RedundancyGraph64 = filter::RedundancyGraph<f64>;
pub type RedundancyGraph32 = filter::RedundancyGraph<f32>;
pub type Model64 = neural::Model<f64>;
pub type Model32 = neural::Model<f32>;
pub type ModelParams64 = neural::ModelParams<f64>;
pub type ModelParams32 = neural::ModelParams<f32>;
