//! Lattices, discretized kernels, grid functions and the non-local operators `L` and `L_R^psi`.

mod field;
mod grid;
mod kernel;
mod operator;

pub use field::{Extension, GridFunction};
pub use grid::Grid;
pub use kernel::{build_kernel, Kernel, KernelProfile};
pub use operator::{
    annulus_mass, apply_at, nonlocal_apply, nonlocal_dirichlet_apply, sandwich_check, SandwichReport,
    SandwichViolation,
};
