//! Core library for sltgen: LLM-driven generation of C test programs that
//! maximize instructions per cycle on a simulated processor.
//!
//! The pipeline renders a chat prompt (optionally compressed by the
//! [`optimize`] transforms), requests completions through a [`gateway`],
//! pulls code out of the raw response ([`extract`]), compiles and scores it
//! on a simulator backend ([`eval`]), and drives the sampling knobs with a
//! from-scratch Tree-structured Parzen Estimator ([`tpe`]). Every artifact
//! lands in an append-only, replayable campaign log ([`store`]), and
//! [`metrics`] turns a campaign into pass@k numbers.

pub mod campaign;
pub mod config;
pub mod eval;
pub mod extract;
pub mod gateway;
pub mod hash;
pub mod metrics;
pub mod optimize;
pub mod prompt;
pub mod store;
pub mod tpe;
