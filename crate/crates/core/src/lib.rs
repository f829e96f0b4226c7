//! Martingale-coboundary machinery for chaotic maps.

// `!(x > 0.0)` is how range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decomposition;
pub mod error;
pub mod homog;
pub mod maps;
pub mod matrix;
pub mod processes;
pub mod rng;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
pub use matrix::Matrix;
