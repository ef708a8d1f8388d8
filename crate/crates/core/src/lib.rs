//! Pricing library for the Russian option with a last-exit-time horizon.
//!
//! The contract pays the running maximum minus a multiple of the price, but
//! only if exercised before the price last touches that maximum. The library
//! covers the closed-form perpetual solution, the finite-horizon free
//! boundary characterised by a nonlinear Volterra integral equation solved by
//! backward induction, and Monte Carlo validation of the full
//! measure-change/dimension-reduction chain.

// Validation predicates use negated comparisons (`!(x > 0.0)`) on purpose:
// they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature nodes and weights are written at full published precision.
#![allow(clippy::excessive_precision)]

pub mod azema_kernel;
pub mod error;
pub mod fbp_solver;
pub mod market_model;
pub mod mc_validator;
pub mod numerics;
pub mod perpetual_solver;
pub mod y_law;

pub use error::{Error, Result};
