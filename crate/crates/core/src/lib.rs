//! Overhead-aware user partitioning for K-user MIMO interference channels.
//!
//! Users are split into groups that transmit in orthogonal time slots. Inside
//! a group the transmitters align their interference; the price is training
//! and feedback overhead that grows with the group size. The crate models
//! that trade-off and searches for good partitions; [`experiment`] drives the
//! batch runs that write CSV.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod precoding;
pub mod rate;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
