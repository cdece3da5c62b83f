//! Sequential LSV intermittent maps, their transfer operators, and
//! extreme value statistics for time-dependent thresholds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod error;
pub mod experiment;
pub mod maps;
pub mod montecarlo;
pub mod mesh;
pub mod recurrence;
pub mod rng;
pub mod stats;
pub mod thresholds;
pub mod transfer;

pub use error::{Error, Result};
