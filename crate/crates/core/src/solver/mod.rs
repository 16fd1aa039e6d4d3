//! Finite-difference θ-scheme for kernel slices `g(t,·,x,·)` and the
//! forward Cauchy problem on a truncated box with absorbing boundary.
//!
//! The kernel is obtained from the transpose of the forward scheme, so
//! [`kernel_quadrature`] and [`solve_cauchy`] are exactly dual up to the
//! mollification of the point mass.

mod assembly;
mod grid;
mod kernel;
pub mod linalg;
mod slice;
mod stepper;

pub use grid::SpaceTimeGrid;
pub use kernel::{
    evolution_residual, kernel_quadrature, sample_on_grid, solve_cauchy, solve_kernel_pair,
    solve_kernel_slice, solve_reference_kernel_g0, truncation_floor, truncation_radius,
    truncation_radius_unclamped, validate_evolution_identity, SolverConfig,
};
pub use slice::{KernelSlice, SliceSidecar};
