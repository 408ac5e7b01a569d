//! Dynamic resonance fluorescence of a pulsed, cavity-coupled two-level emitter.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod error;
pub mod experiments;
pub mod model;
pub mod ode;
pub mod parallel;
pub mod phonon;
pub mod propagate;
pub mod qcore;
pub mod quadrature;
pub mod units;

pub use error::{Error, ErrorCategory, Result};
