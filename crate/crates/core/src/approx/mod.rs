//! Bounded-diffusion approximation: the cutoff profile `φ`, the truncated
//! operators `𝒜ₙ` with `q⁽ⁿ⁾ = φₙq + (1−φₙ)ηI`, the constant remapping for
//! the truncated estimate and the kernel convergence sweep `gₙ → g`.

mod cutoff;
mod sweep;
mod truncated;

pub use cutoff::{build_cutoff_profile, CutoffProfile};
pub use sweep::{convergence_sweep, ConvergenceSweep, SweepLevel};
pub use truncated::{build_truncated_operator, remap_all, remap_constants, TruncatedOperator};
