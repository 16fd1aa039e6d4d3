//! Quantitative bound machinery: scalar inequalities, weight systems with
//! their constants `c₁…c₉`, ζ-profiles, the main-estimate right-hand sides
//! and the fitted-constant verification of the kernel bound shape.

mod kernel_bound;
mod main_bound;
mod scalar;
mod weights;
mod window;
mod zeta;

pub use kernel_bound::{
    bound_margins, fit_constant, select_regime, sweep_csv, verify_kernel_bound, BoundVerdict,
    ConstantFit, MarginRange, RegimeSelection, SweepRow,
};
pub use main_bound::{assemble_main_bound, main_bound_from_constants, BoundVariant};
pub use scalar::{envelope_bound, largest_root, root_polynomial, x_root_bound};
pub use weights::{compute_weight_constants, gamma_exponents, WeightReport, WeightSystem};
pub use window::TimeWindow;
pub use zeta::{
    check_mass_bound, check_zeta_bound, compute_gamma_moments, compute_zeta, GammaMoments,
    MassBoundReport, ZetaProfile, ZetaReport,
};
