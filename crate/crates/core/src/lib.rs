//! Numerical solver for the ergodic problem `lambda - L[u] + |Du|^m = f` in one dimension,
//! where `L[u] = J*u - u` is a zero-order convolution operator with a compactly supported kernel.
//!
//! The crate is `no_std` (it needs `alloc`). Floating-point functions come from `libm`.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub(crate) mod math;

pub mod ergodic;
pub mod grid_kernel;
pub mod problem;
pub mod real;
pub mod regimes;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
