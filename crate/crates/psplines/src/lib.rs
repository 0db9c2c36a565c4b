//! Penalized regression B-splines on arbitrary knot sequences.
//!
//! The crate covers the full smoothing pipeline: knot placement ([`knots`]),
//! B-spline basis evaluation and spline derivatives ([`basis`]), standard and
//! knot-spacing-aware general difference penalties plus the derivative penalty
//! with its sparse banded root ([`penalty`]), penalized least-squares fitting
//! with GCV smoothing-parameter selection ([`fit`]), and seeded Monte-Carlo
//! benchmark studies comparing the estimator flavors ([`sim`]).
//!
//! Runnable walkthroughs live in `examples/`; the `psplines` binary exposes
//! the same functionality as subcommands over CSV/JSON files.

pub mod basis;
pub mod cli;
pub mod error;
pub mod fit;
pub mod io;
pub mod knots;
pub mod linalg;
pub mod penalty;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use knots::KnotVector;
