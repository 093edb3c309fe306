//! Sign sequences, sign-change counts, zero location and the bell-shape
//! verdict.

pub mod bell;
pub mod pattern;
pub mod zeros;

pub use bell::{stable_range, verify_bell_shape, verify_bell_shape_with, BellShapeReport, GridOptions, OrderResult};
pub use pattern::{count_sign_changes_closed, count_sign_changes_open, sign_of, SignPattern, SignSymbol};
pub use zeros::{locate_zeros, locate_zeros_with, match_pattern, strictly_interlace, Endpoints, Grid, Zero, ZeroSet};
