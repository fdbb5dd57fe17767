//! Desk-scale laboratory for the gradient flow of a Seiberg-Witten-type
//! functional on flat m-tori.
//!
//! A spinor field φ coupled to a U(1) connection a evolves by the exact
//! negative L²-gradient of
//!
//!   SW(φ, a) = ∫ |∇_a φ|² + ½|F_a|² + (S/4)|φ|² + (1/8)|φ|⁴
//!
//! discretized so that the building blocks of the continuum analysis are
//! exact identities: d∘d = 0, adjoint difference pairs, exact gauge
//! covariance, and a flow right-hand side that is the literal derivative of
//! the discrete functional.  The diagnostics module turns the analytic
//! apparatus around such flows — energy identity, sup bound, backward
//! heat-kernel monotonicity quantities, ε-regularity detection, Vitali
//! covers, blow-up rescaling — into computable numbers.

pub mod cli;
pub mod clifford;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod flow;
pub mod functional;
pub mod lattice;

pub use error::{Result, SwError};
