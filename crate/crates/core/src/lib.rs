//! Nash cost-guaranteeing state feedback for discrete-time two-player
//! linear-quadratic games with quadratically constrained uncertainty, plus a
//! fiscal-monetary instantiation with debt-ratio scenario analysis.

// NaN-rejecting `!(x > 0.0)` tests and index loops over dense matrices are
// deliberate throughout the numerical code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimate;
pub mod fimo;
pub mod game;
pub mod linalg;
pub mod scenario;
pub mod sdp;
pub mod synthesis;
pub mod uncertainty;

pub use error::{Error, Result};
