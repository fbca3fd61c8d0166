//! Decentralized multi-robot planning with macro-actions: finite state
//! controller search by cross-entropy over discretized observations, and
//! policy search over stochastic kernel controllers that act directly on
//! continuous observations.

// NaN must fail the parameter checks, so they are written as `!(x >= lo)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod domains;
pub mod epscko;
pub mod error;
pub mod fsa;
pub mod harness;
pub mod sim;
pub mod skfsa;

pub use error::{Error, Result};
