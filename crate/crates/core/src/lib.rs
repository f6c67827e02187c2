//! Operator renewal sequences, dynamical truncation and correlation decay for
//! Young towers over finite-rank induced systems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod correlate;
pub mod error;
pub mod linalg;
pub mod numeric;
pub mod operators;
pub mod renewal;
pub mod systems;
pub mod tower;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use bounds::{BoundParams, BoundRow, RecipeClass, RecipeOptions};
pub use correlate::{CorrelationSeries, Method, Observable};
pub use operators::{NormKind, OperatorFamily};
pub use renewal::RenewalSequence;
pub use systems::{InducedSystem, LogPower, LsvParams, TailClass, TailModel};
pub use tower::Tower;
