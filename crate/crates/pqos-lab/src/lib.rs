//! Synthetic highway drive-test laboratory for look-ahead throughput
//! prediction.
//!
//! The crate simulates a multi-vehicle measurement campaign over a shared
//! radio environment, aligns self/next vehicle traces into supervised
//! datasets, trains gradient-boosted regression trees and evaluates
//! look-ahead throughput prediction across feature sets.

pub mod alignment;
pub mod correlation;
pub mod error;
pub mod evaluation;
pub mod gbt;
pub mod radio_sim;
pub mod svg;
pub mod trace;

pub use error::{Error, Result};
