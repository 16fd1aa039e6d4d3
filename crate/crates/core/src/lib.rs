//! Numerical laboratory for Green-kernel upper bounds of nonautonomous
//! Kolmogorov operators with unbounded coefficients and a potential term.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! operator ──► lyapunov certificates ──► kernel solver ──► bound engine
//!                     │                                       ▲
//!                     └──────► coefficient approximation ─────┘
//! ```
//!
//! * [`operator`]: coefficient fields `(Q, F, V)`, smoothed powers `|x|_*^s`,
//!   test functions and pointwise operator application.
//! * [`lyapunov`]: static certificates `Z = exp(δ|x|_*^β)` and
//!   time-dependent functions `W(s,x) = exp(ε(t-s)^α |x|_*^β)` with rate `h`.
//! * [`solver`]: θ-scheme finite differences for the adjoint (Fokker–Planck)
//!   equation producing kernel slices `g(t,·,x,·)`, plus the forward Cauchy problem.
//! * [`bounds`]: moment functionals, weight systems, ζ-profiles and the
//!   kernel bound assembly / shape verification.
//! * [`approx`]: bounded-diffusion truncation `q⁽ⁿ⁾` and the kernel convergence sweep.
//! * [`experiment`]: JSON experiment configs, the staged runner and plot-ready output.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod lyapunov;
pub mod operator;
pub mod par;
pub mod solver;

pub use error::{Error, Result};
