//! Reference-free scoring of synthesized speech.
//!
//! Intelligibility and prosody are scored as the mean per-token conditional
//! log-likelihood of discrete speech tokens given the input phonemes:
//!
//! * [`quantizer`] turns frame features into content tokens with k-means,
//! * [`prosody`] pools frame features per phoneme and quantizes them with
//!   residual vector quantization,
//! * [`generator`] trains the text-to-token transformer (and an
//!   unconditional token language model as a baseline),
//! * [`scoring`] composes them into per-utterance scores,
//! * [`evalbench`] holds baseline metrics, correlation analysis, F0
//!   perturbations and score-distribution summaries,
//! * [`synth`] generates seeded desk-scale corpora for end-to-end runs.

pub mod corpus;
pub mod error;
pub mod evalbench;
pub mod generator;
pub mod prosody;
pub mod quantizer;
pub mod scoring;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

/// Toolkit version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
