//! Discovery and assessment of repetitive movement patterns in multimodal
//! public-speaking recordings.
//!
//! The crate factors a multichannel motion signal into short repeated
//! patterns via shift-invariant sparse coding ([`sisc`]), computes
//! disfluency, prosody, body-movement, facial and lexical features over the
//! time windows where each pattern occurs ([`features`]), trains linear and
//! neural predictors of per-pattern meaningfulness ratings ([`models`]),
//! and evaluates them with repeated random splits, ROC/AUC, correlation,
//! Welch t-tests and per-category weight shares ([`eval`]).
//!
//! [`pipeline`] wires the pieces into a batch workflow driven by a single
//! config file; the `mannerscope` binary exposes it as subcommands. The
//! `examples/` directory has one runnable example per major capability.

pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod signal;
pub mod sisc;

pub use error::{Error, Result};
