//! Approximate message passing on random quadratic optimisation problems,
//! its tree-polynomial representation, and a robust local-statistics
//! semidefinite relaxation that recovers the AMP output from a corrupted
//! input.

pub mod amp;
pub mod ensembles;
pub mod error;
pub mod forest;
pub mod harness;
pub mod lsth;
pub mod matrix;
pub mod polyfit;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::SymmetricMatrix;
