//! Heat kernels and spectral multipliers for the weighted Jacobi, ball and
//! simplex operators, built from explicit orthonormal polynomial eigenbases.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod config;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod operators;
pub mod poly;
pub mod precision;
pub mod quadrature;
pub mod suite;
pub mod validation;
pub mod volume;

pub use domain::{DomainKind, DomainSpec};
pub use error::{Error, Result};
pub use poly::{MultiIndex, MultiPoly};
