//! Space-time isogeometric discretization of the clamped biharmonic wave
//! equation `u_tt + Δ²u = f` on boxes in one and two space dimensions.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: spline spaces, Gram matrices, the
//! Kronecker-structured space-time operator, the generalized-Schur based
//! direct solver, and the manufactured-solution studies. Clocks, files and
//! the command line live in the `bihw` companion crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod assembly;
mod error;
pub mod linalg;
pub mod quadrature;
pub mod solver;
pub mod splines;
pub mod system;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
