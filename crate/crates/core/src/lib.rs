//! Hierarchical prosodic controls for controllable-emphasis TTS front-ends.
//!
//! The crate covers the whole control path at desk scale:
//!
//! - [`corpus`]: word-aligned utterances with f0 tracks, JSON-lines I/O,
//!   held-out splitting and a synthetic generator with planted emphasis effects.
//! - [`features`]: the four prosodic statistics (sentence/word log per-phone
//!   duration and log-f0 spread), corpus-wide normalization and phone-level
//!   targets with replication weights.
//! - [`nnet`]: a small double-precision kernel (Bi-LSTM, layer norm, dropout,
//!   embeddings, ADAM) with hand-written gradients and a finite-difference checker.
//! - [`predictor`]: the N-block prosodic-control network, weighted L1 training
//!   and held-out grid search.
//! - [`control`]: rectification, focus boosting and realization of physical
//!   durations and f0 spreads.
//! - [`s2s_loss`]: the decoder's multi-task mel/LPC loss as a pure function.
//! - [`cli`]: the `prosoctl` command-line surface.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod control;
pub mod corpus;
pub mod error;
pub mod features;
pub mod nnet;
pub mod plot;
pub mod predictor;
pub mod s2s_loss;

pub use error::{Error, Result};
