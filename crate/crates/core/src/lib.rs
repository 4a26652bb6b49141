//! Drift and mixing-density estimation for normal variance-mean mixtures
//! `X = μξ + √ξ·η`.
//!
//! * [`mu_estimator`] locates the zero of a weighted exponential transform.
//! * [`mellin`] recovers the mixing density by Mellin inversion along the
//!   characteristic exponent.
//! * [`models`] provides test-bed mixing laws with exact transforms.
//! * [`evaluation`] runs seeded Monte Carlo studies.
//! * [`cli`] drives the `vmmix` binary.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod mellin;
pub mod models;
pub mod mu_estimator;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
