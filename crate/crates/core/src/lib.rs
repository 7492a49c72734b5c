//! Open-set automatic modulation recognition.
//!
//! The crate covers the whole pipeline: synthetic baseband generation
//! ([`siggen`]), the two-matrix I/Q + amplitude/phase representation
//! ([`represent`]), the SIGF frame-file format ([`dataio`]), a dual-channel
//! LSTM with hand-derived backpropagation through time ([`network`]),
//! softmax + center-loss training ([`training`]), Weibull tail fitting and
//! logit recalibration for unknown-class rejection ([`openset`]), metrics and
//! plots ([`eval`]) and the command-line driver ([`cli`]).

pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod network;
pub mod numcore;
pub mod openset;
pub mod represent;
pub mod siggen;
pub mod training;

pub use error::{Error, Result};
