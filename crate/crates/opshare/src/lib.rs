//! Slotted-time spectrum-sharing simulator built around opportunity
//! probability (OP): the probability that a node's SIR clears an access
//! threshold, conditioned on the interference measured at its nearest
//! sensor.
//!
//! The crate provides:
//! - [`geometry`]: Poisson interferer fields, path gain, fading, SINR.
//! - [`op`]: sensor-conditioned OP estimation, gridded lookup tables, and a
//!   closed-form coverage oracle for the uncorrelated limit.
//! - [`mac`]: OP-to-transmission policies (linear/concave/deterministic) and
//!   the three power/access modes.
//! - [`duplex`]: hybrid half/full-duplex pair logic with residual
//!   self-interference.
//! - [`sim`]: the slotted end-to-end engine, metrics, and sweep runner.
//! - [`scenario`]: declarative run configuration, file parsing, overrides.
//! - [`report`]: CSV result bundles and sweep comparison tables.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duplex;
pub mod error;
pub mod geometry;
pub mod mac;
pub mod op;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
