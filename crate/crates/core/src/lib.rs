//! Piecewise-linearized DistFlow power-flow constraints for distribution-system MILPs.
//!
//! The crate is organised bottom-up:
//!
//! * [`pwl`] holds the mathematics of the segment approximation of `y²`: slopes,
//!   ordered (error-optimal) filling, error metrics and brute-force oracles.
//! * [`milp`] is a solver-agnostic MILP representation with an LP-format writer,
//!   a solution-file reader and a subprocess solver adapter.
//! * [`distflow`] builds the linearized branch-flow model of a radial feeder,
//!   in plain PWL or ordered SO-PWL mode, with the restoration objective.
//! * [`validation`] analyses solved models: filling states, per-branch relative
//!   errors and an exact backward/forward sweep cross-check.
//!
//! Batch evaluation (sampling checks, oracle enumeration) runs on rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod distflow;
pub mod error;
pub mod milp;
pub mod par;
pub mod pwl;
pub mod validation;

pub use error::{Error, Result};
