use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::expr::Expr;
use super::power::SmoothPower;
use crate::{Error, Result};

/// Evaluable coefficients `(Q, ∂Q, F, V)` of a Kolmogorov operator
/// `Tr(Q D²) + F·∇ − V` on `[0,1] × ℝ^d`.
///
/// Implementations are read-only and must be safe to evaluate from many
/// threads at once.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn diffusion(&self, s: f64, x: &[f64]) -> DMatrix<f64>;
    /// `∂ₖ q_ij` at `(s, x)`.
    fn diffusion_derivative(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64>;
    fn drift(&self, s: f64, x: &[f64]) -> DVector<f64>;
    fn potential(&self, s: f64, x: &[f64]) -> f64;

    /// True when none of the coefficients depends on time.
    fn is_autonomous(&self) -> bool {
        false
    }

    /// Asymptotic radial description for `|x| ≥ 1`, when the field has one.
    fn power_law(&self) -> Option<RadialPowerLaw> {
        None
    }
}

/// `Q = (a₀ + a₁|x|^m) I`, `F = −b |x|^{p−1} x`, `V = c |x|^r` on `|x| ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPowerLaw {
    pub diffusion_const: f64,
    pub diffusion_coef: f64,
    pub diffusion_exp: f64,
    pub drift_coef: f64,
    pub drift_exp: f64,
    pub potential_coef: f64,
    pub potential_exp: f64,
}

/// A coefficient field together with its ellipticity constant `η` and
/// Hölder exponent `ς` (metadata only).
#[derive(Clone)]
pub struct CoefficientField {
    inner: Arc<dyn Coefficients>,
    eta: f64,
    holder: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("inner", &self.inner)
            .field("eta", &self.eta)
            .field("holder", &self.holder)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(inner: impl Coefficients + 'static, eta: f64) -> Result<Self> {
        Self::from_arc(Arc::new(inner), eta)
    }

    pub fn from_arc(inner: Arc<dyn Coefficients>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!(
                "ellipticity constant must be > 0, got {eta}"
            )));
        }
        if inner.dim() == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self {
            inner,
            eta,
            holder: 0.5,
        })
    }

    /// Sets the declared Hölder exponent; it is never checked numerically.
    pub fn with_holder_exponent(mut self, holder: f64) -> Result<Self> {
        if !(holder > 0.0 && holder < 1.0) {
            return Err(Error::invalid(format!(
                "Hölder exponent must lie in (0,1), got {holder}"
            )));
        }
        self.holder = holder;
        Ok(self)
    }

    /// The example family `(1+|x|_*^m)Δ − |x|_*^{p−1}x·∇ − |x|_*^r` with `η = 1`.
    pub fn example(m: f64, p: f64, r: f64, dim: usize) -> Result<Self> {
        Self::new(ExampleCoefficients::new(m, p, r, dim)?, 1.0)
    }

    /// `Q = q I`, `F = 0`, `V = c`, with `η = q`.
    pub fn constant(dim: usize, diffusion: f64, potential: f64) -> Result<Self> {
        if !(diffusion > 0.0) {
            return Err(Error::invalid("constant diffusion must be positive"));
        }
        Self::new(
            ConstantCoefficients {
                dim,
                diffusion,
                potential,
            },
            diffusion,
        )
    }

    /// The pure Laplacian `Δ` in dimension `dim`.
    pub fn laplacian(dim: usize) -> Self {
        Self::constant(dim, 1.0, 0.0).expect("unit diffusion is valid")
    }

    /// The same operator with `V ≡ 0` (the operator `𝒜₀ = 𝒜 + V`).
    pub fn without_potential(&self) -> Self {
        Self {
            inner: Arc::new(WithoutPotential(self.inner.clone())),
            eta: self.eta,
            holder: self.holder,
        }
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder
    }

    pub fn diffusion(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        self.inner.diffusion(s, x)
    }

    pub fn diffusion_derivative(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        self.inner.diffusion_derivative(s, x, k)
    }

    /// `(Σᵢ ∂ᵢ q_ij)_j`.
    pub fn diffusion_divergence(&self, s: f64, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let mut div = DVector::zeros(d);
        for i in 0..d {
            let dq = self.inner.diffusion_derivative(s, x, i);
            for j in 0..d {
                div[j] += dq[(i, j)];
            }
        }
        div
    }

    pub fn drift(&self, s: f64, x: &[f64]) -> DVector<f64> {
        self.inner.drift(s, x)
    }

    pub fn potential(&self, s: f64, x: &[f64]) -> f64 {
        self.inner.potential(s, x)
    }

    pub fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    pub fn power_law(&self) -> Option<RadialPowerLaw> {
        self.inner.power_law()
    }
}

/// Coefficients of the example operator.
#[derive(Debug, Clone)]
pub struct ExampleCoefficients {
    pub m: f64,
    pub p: f64,
    pub r: f64,
    dim: usize,
    diff_power: SmoothPower,
    drift_power: SmoothPower,
    pot_power: SmoothPower,
}

impl ExampleCoefficients {
    pub fn new(m: f64, p: f64, r: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::invalid(format!(
                "drift exponent p must satisfy p > 1, got {p}"
            )));
        }
        if !(m >= 0.0) {
            return Err(Error::invalid(format!(
                "diffusion exponent m must be >= 0, got {m}"
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::invalid(format!(
                "potential exponent r must be >= 0, got {r}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self {
            m,
            p,
            r,
            dim,
            diff_power: SmoothPower::new(m)?,
            drift_power: SmoothPower::new(p - 1.0)?,
            pot_power: SmoothPower::new(r)?,
        })
    }
}

impl Coefficients for ExampleCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }

    fn diffusion(&self, _s: f64, x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (1.0 + self.diff_power.value(x))
    }

    fn diffusion_derivative(&self, _s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        let g = self.diff_power.gradient(x);
        DMatrix::identity(self.dim, self.dim) * g[k]
    }

    fn drift(&self, _s: f64, x: &[f64]) -> DVector<f64> {
        let a = self.drift_power.value(x);
        DVector::from_iterator(self.dim, x.iter().map(|xi| -a * xi))
    }

    fn potential(&self, _s: f64, x: &[f64]) -> f64 {
        self.pot_power.value(x)
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn power_law(&self) -> Option<RadialPowerLaw> {
        Some(RadialPowerLaw {
            diffusion_const: 1.0,
            diffusion_coef: 1.0,
            diffusion_exp: self.m,
            drift_coef: 1.0,
            drift_exp: self.p,
            potential_coef: 1.0,
            potential_exp: self.r,
        })
    }
}

#[derive(Debug, Clone)]
struct ConstantCoefficients {
    dim: usize,
    diffusion: f64,
    potential: f64,
}

impl Coefficients for ConstantCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }

    fn diffusion(&self, _s: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.diffusion
    }

    fn diffusion_derivative(&self, _s: f64, _x: &[f64], _k: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn drift(&self, _s: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn potential(&self, _s: f64, _x: &[f64]) -> f64 {
        self.potential
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn power_law(&self) -> Option<RadialPowerLaw> {
        Some(RadialPowerLaw {
            diffusion_const: self.diffusion,
            diffusion_coef: 0.0,
            diffusion_exp: 0.0,
            drift_coef: 0.0,
            drift_exp: 1.0,
            potential_coef: self.potential,
            potential_exp: 0.0,
        })
    }
}

#[derive(Debug)]
struct WithoutPotential(Arc<dyn Coefficients>);

impl Coefficients for WithoutPotential {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn diffusion(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        self.0.diffusion(s, x)
    }

    fn diffusion_derivative(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        self.0.diffusion_derivative(s, x, k)
    }

    fn drift(&self, s: f64, x: &[f64]) -> DVector<f64> {
        self.0.drift(s, x)
    }

    fn potential(&self, _s: f64, _x: &[f64]) -> f64 {
        0.0
    }

    fn is_autonomous(&self) -> bool {
        self.0.is_autonomous()
    }

    fn power_law(&self) -> Option<RadialPowerLaw> {
        self.0.power_law().map(|mut law| {
            law.potential_coef = 0.0;
            law
        })
    }
}

/// Diffusion given either as a scalar multiple of the identity or entrywise.
#[derive(Debug, Clone)]
pub enum DiffusionExpr {
    Scalar(Expr),
    Matrix(Vec<Vec<Expr>>),
}

/// Coefficients given by expressions; `∂Q` is approximated by central
/// differences with step `1e−6·max(1, |xₖ|)`.
#[derive(Debug, Clone)]
pub struct CustomCoefficients {
    dim: usize,
    diffusion: DiffusionExpr,
    drift: Vec<Expr>,
    potential: Expr,
    autonomous: bool,
}

impl CustomCoefficients {
    pub fn new(
        dim: usize,
        diffusion: DiffusionExpr,
        drift: Vec<Expr>,
        potential: Expr,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if drift.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: drift.len(),
            });
        }
        let mut exprs: Vec<&Expr> = drift.iter().chain(std::iter::once(&potential)).collect();
        match &diffusion {
            DiffusionExpr::Scalar(e) => exprs.push(e),
            DiffusionExpr::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid(format!(
                        "diffusion matrix must be {dim}x{dim}"
                    )));
                }
                exprs.extend(rows.iter().flatten());
            }
        }
        let autonomous = !exprs.iter().any(|e| e.depends_on_time());
        Ok(Self {
            dim,
            diffusion,
            drift,
            potential,
            autonomous,
        })
    }

    /// Parses string expressions; `q` has one entry (scalar) or `d²` entries
    /// in row-major order.
    pub fn parse(dim: usize, q: &[String], f: &[String], v: &str) -> Result<Self> {
        let diffusion = if q.len() == 1 {
            DiffusionExpr::Scalar(Expr::parse(&q[0], dim)?)
        } else if q.len() == dim * dim {
            let mut rows = Vec::with_capacity(dim);
            for i in 0..dim {
                rows.push(
                    (0..dim)
                        .map(|j| Expr::parse(&q[i * dim + j], dim))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            DiffusionExpr::Matrix(rows)
        } else {
            return Err(Error::invalid(format!(
                "diffusion needs 1 or {} expressions, got {}",
                dim * dim,
                q.len()
            )));
        };
        let drift = f
            .iter()
            .map(|e| Expr::parse(e, dim))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, diffusion, drift, Expr::parse(v, dim)?)
    }
}

impl Coefficients for CustomCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }

    fn diffusion(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        match &self.diffusion {
            DiffusionExpr::Scalar(e) => DMatrix::identity(self.dim, self.dim) * e.eval(s, x),
            DiffusionExpr::Matrix(rows) => {
                DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j].eval(s, x))
            }
        }
    }

    fn diffusion_derivative(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        let h = 1e-6 * x[k].abs().max(1.0);
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[k] += h;
        b[k] -= h;
        (self.diffusion(s, &a) - self.diffusion(s, &b)) / (2.0 * h)
    }

    fn drift(&self, s: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.drift.iter().map(|e| e.eval(s, x)))
    }

    fn potential(&self, s: f64, x: &[f64]) -> f64 {
        self.potential.eval(s, x)
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn example_at_origin_and_two() {
        let f = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
        assert_eq!(f.diffusion(0.0, &[0.0])[(0, 0)], 2.0);
        assert_eq!(f.drift(0.0, &[0.0])[0], 0.0);
        assert_eq!(f.potential(0.0, &[0.0]), 0.0);

        assert_eq!(f.diffusion(0.3, &[2.0])[(0, 0)], 2.0);
        assert_relative_eq!(f.drift(0.3, &[2.0])[0], -8.0, max_relative = 1e-14);
        assert_relative_eq!(f.potential(0.3, &[2.0]), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn example_rejects_p_at_most_one() {
        assert!(CoefficientField::example(0.0, 1.0, 2.0, 1).is_err());
        assert!(CoefficientField::example(0.0, 0.5, 2.0, 1).is_err());
        assert!(CoefficientField::example(-1.0, 3.0, 2.0, 1).is_err());
    }

    #[test]
    fn custom_field_matches_example() {
        let c = CustomCoefficients::parse(
            1,
            &["1 + smoothpow(0, x)".into()],
            &["-smoothpow(2, x) * x".into()],
            "smoothpow(2, x)",
        )
        .unwrap();
        let f = CoefficientField::new(c, 1.0).unwrap();
        let e = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
        for &x in &[-2.5, -0.3, 0.0, 0.7, 1.9] {
            assert!((f.drift(0.0, &[x])[0] - e.drift(0.0, &[x])[0]).abs() < 1e-12);
            assert!((f.potential(0.0, &[x]) - e.potential(0.0, &[x])).abs() < 1e-12);
            assert!(f.diffusion_derivative(0.0, &[x], 0)[(0, 0)].abs() < 1e-8);
        }
        assert!(f.is_autonomous());
    }

    #[test]
    fn custom_field_rejects_shape_errors() {
        assert!(CustomCoefficients::parse(
            2,
            &["1".into(), "0".into()],
            &["0".into(), "0".into()],
            "0"
        )
        .is_err());
        assert!(CustomCoefficients::parse(2, &["1".into()], &["0".into()], "0").is_err());
    }

    #[test]
    fn without_potential_zeroes_v_only() {
        let f = CoefficientField::example(1.0, 3.0, 2.0, 2).unwrap();
        let g = f.without_potential();
        let x = [1.3, -0.4];
        assert_eq!(g.potential(0.2, &x), 0.0);
        assert_eq!(g.diffusion(0.2, &x), f.diffusion(0.2, &x));
        assert_eq!(g.drift(0.2, &x), f.drift(0.2, &x));
    }

    proptest! {
        #[test]
        fn example_dq_matches_finite_differences(m in 0.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let f = CoefficientField::example(m, 2.5, 1.0, 2).unwrap();
            let p = [x, y];
            let h = 1e-6;
            for k in 0..2 {
                let mut a = p; a[k] += h;
                let mut b = p; b[k] -= h;
                let fd = (f.diffusion(0.0, &a) - f.diffusion(0.0, &b)) / (2.0 * h);
                let dq = f.diffusion_derivative(0.0, &p, k);
                let scale = 1.0 + dq.norm();
                prop_assert!((fd - dq).norm() <= 1e-6 * scale);
            }
        }

        #[test]
        fn example_forced_lower_bounds(m in 0.0f64..4.0, p in 1.01f64..4.0, r in 0.0f64..4.0,
                                       x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let f = CoefficientField::example(m, p, r, 2).unwrap();
            let q = f.diffusion(0.0, &[x, y]);
            prop_assert!(q[(0, 0)] >= 1.0 && q[(1, 1)] >= 1.0);
            prop_assert!(f.potential(0.0, &[x, y]) >= 0.0);
        }
    }
}
