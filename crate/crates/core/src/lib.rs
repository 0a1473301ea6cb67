//! Variational preparation of Gibbs states across Hamiltonian families.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod par;
pub mod qbm;
pub mod rng;
pub mod thermal;
pub mod training;

pub use error::{Error, Result};
pub use par::Execution;
