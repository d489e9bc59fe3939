//! Uplink system-level simulation library for user-centric cell-free
//! massive MIMO networks.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN, which must never pass a config check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod config;
pub mod dmrs;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod propagation;
pub mod receivers;
pub mod report;
pub mod rng;
pub mod srs;
