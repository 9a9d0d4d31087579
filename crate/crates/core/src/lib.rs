//! Controllability analysis for linear systems driven by a Markov switching
//! process with state jumps.
//!
//! The crate computes the backward chain of largest invariant subspaces that
//! decides approximate null-controllability, builds explicit dual witnesses
//! when controllability fails, solves the associated backward ODE cascade,
//! and cross-checks everything with a Monte-Carlo simulator.

pub mod bsde;
pub mod cli;
pub mod criteria;
pub mod expm;
pub mod matrix;
pub mod mcsim;
pub mod model;
pub mod scalar;
pub mod subspace;
pub mod witness;

pub use matrix::Matrix;
pub use model::SwitchSystem;
pub use scalar::{Rational, Scalar};
pub use subspace::{Subspace, Tolerance};
