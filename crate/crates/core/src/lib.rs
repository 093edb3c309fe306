//! Numerical verification of the bell shape of one-sided stable densities.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod numeric;
pub mod sign;
pub mod stable;
pub mod selfdecomp;
pub mod tp;
pub mod wbs;
pub mod yamazato;

pub use error::{Error, Result};
