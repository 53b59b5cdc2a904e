//! Set-prediction core for social group activity recognition.
//!
//! Ground-truth groups and individuals are matched to query predictions by
//! minimum-cost bipartite assignment, trained with focal/L1/GIoU losses on a
//! toy cross-attention decoder, and decoded at inference time by matching
//! predicted member points to predicted individuals.

pub mod assignment;
pub mod cli;
pub mod costs;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod losses;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod train;
pub mod types;

pub use error::{Error, Result};
