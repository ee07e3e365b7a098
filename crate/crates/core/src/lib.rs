//! Biased randomly trapped random walks on Z and biased walks on subcritical
//! Galton-Watson trees conditioned to survive.
//!
//! The crate pairs Monte Carlo simulation with exact oracles: generation-size
//! moment recursions, tree linear solves for hitting times and visit counts,
//! and closed forms for speeds and local times.

// `!(x > 0.0)` also rejects NaN; index loops walk parallel arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bridge;
pub mod error;
pub mod harness;
pub mod laws;
pub mod offspring;
pub mod rtrw;
pub mod stream;
pub mod tree_walk;
pub mod trees;

mod solve;

pub use error::{Error, Result};
pub use offspring::{OffspringLaw, SizeBiasedLaw};
pub use stream::{derive_stream, Stream};
