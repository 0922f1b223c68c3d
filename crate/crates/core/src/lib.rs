//! Gaussian interface models on `Z^d`: lattice geometry, Green's functions,
//! Gaussian conditioning, Stein-Chen Poisson approximation bounds, extreme
//! value scaling and exceedance point processes.
//!
//! The crate is `no_std` with `alloc`. Everything that touches files, threads
//! or the command line lives in the `glx` companion crate.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod audit;
pub mod error;
pub mod evt;
pub mod gaussian;
pub mod green;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod point_process;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stein_chen;

pub use error::{Error, Result};
pub use lattice::{BoxDomain, Site};
pub use model::ModelSpec;
