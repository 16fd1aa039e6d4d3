//! Coefficient fields, smoothed powers, test functions and pointwise
//! application of `𝒜 = Tr(Q D²) + F·∇ − V`.

mod apply;
pub mod expr;
mod field;
mod power;
mod test_fn;

pub use apply::{apply_jet, apply_operator, check_ellipticity, EllipticityReport, OperatorVariant};
pub use expr::Expr;
pub use field::{
    CoefficientField, Coefficients, CustomCoefficients, DiffusionExpr, ExampleCoefficients,
    RadialPowerLaw,
};
pub(crate) use power::norm;
pub use power::{eval_smooth_power, PowerJet, SmoothPower};
pub use test_fn::{
    check_derivatives, DerivativeCheck, ExpPower, GaussianBump, LinearCombination, Polynomial,
    PolynomialBump, TestFunction, Zero,
};

/// Builds the example operator `(1+|x|_*^m)Δ − |x|_*^{p−1}x·∇ − |x|_*^r`.
pub fn build_example_operator(
    m: f64,
    p: f64,
    r: f64,
    dim: usize,
) -> crate::Result<CoefficientField> {
    CoefficientField::example(m, p, r, dim)
}
