//! Control-time laboratory for observation regions that move along
//! generalized rays.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gcc;
pub mod geometry;
pub mod harness;
pub mod obsdomain;
pub mod paperlib;
pub mod rayflow;
pub mod wave1d;

pub use error::{Error, Result};
