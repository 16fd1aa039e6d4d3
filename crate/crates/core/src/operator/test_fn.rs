use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::power::{norm_sq, SmoothPower};
use crate::{Error, Result};

/// A `C²` function with closed-form gradient and Hessian.
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;

    /// Ball `(center, radius)` outside of which the function vanishes.
    fn support(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Zero {
    pub dim: usize,
}

impl TestFunction for Zero {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
    fn support(&self) -> Option<(Vec<f64>, f64)> {
        Some((vec![0.0; self.dim], 0.0))
    }
}

/// `Σ cᵢ Πⱼ xⱼ^{eᵢⱼ}`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.len(),
            });
        }
        Ok(Self { dim, terms })
    }

    /// `|x|² = Σ xᵢ²`.
    pub fn norm_squared(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|i| {
                let mut e = vec![0; dim];
                e[i] = 2;
                (1.0, e)
            })
            .collect();
        Self { dim, terms }
    }

    fn monomial(x: &[f64], e: &[u32], dk: Option<usize>, dl: Option<usize>) -> f64 {
        let mut e = e.to_vec();
        let mut c = 1.0;
        for d in [dk, dl].into_iter().flatten() {
            if e[d] == 0 {
                return 0.0;
            }
            c *= e[d] as f64;
            e[d] -= 1;
        }
        x.iter()
            .zip(&e)
            .fold(c, |acc, (xi, &ei)| acc * xi.powi(ei as i32))
    }
}

impl TestFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * Self::monomial(x, e, None, None))
            .sum()
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.dim, |k, _| {
            self.terms
                .iter()
                .map(|(c, e)| c * Self::monomial(x, e, Some(k), None))
                .sum()
        })
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |k, l| {
            self.terms
                .iter()
                .map(|(c, e)| c * Self::monomial(x, e, Some(k), Some(l)))
                .sum()
        })
    }
}

/// `A·exp(−|x−c|²/(2w²))`. Treated as supported in `B(c, 9w)`, where it is
/// below `3e−18·A`.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    center: Vec<f64>,
    width: f64,
    amplitude: f64,
}

impl GaussianBump {
    pub fn new(center: Vec<f64>, width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0) || center.is_empty() {
            return Err(Error::invalid("Gaussian bump needs a center and width > 0"));
        }
        Ok(Self {
            center,
            width,
            amplitude,
        })
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, b)| a - b).collect()
    }
}

impl TestFunction for GaussianBump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let z = self.offset(x);
        self.amplitude * (-norm_sq(&z) / (2.0 * self.width * self.width)).exp()
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let v = self.value(x);
        let w2 = self.width * self.width;
        DVector::from_iterator(
            self.dim(),
            self.offset(x).into_iter().map(|zi| -v * zi / w2),
        )
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let v = self.value(x);
        let w2 = self.width * self.width;
        let z = self.offset(x);
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            let diag = if i == j { 1.0 / w2 } else { 0.0 };
            v * (z[i] * z[j] / (w2 * w2) - diag)
        })
    }
    fn support(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.center.clone(), 9.0 * self.width))
    }
}

/// `(1 − |x−c|²/ρ²)³₊`, a genuinely compactly supported `C²` bump.
#[derive(Debug, Clone)]
pub struct PolynomialBump {
    center: Vec<f64>,
    radius: f64,
}

impl PolynomialBump {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.is_empty() {
            return Err(Error::invalid("bump needs a center and radius > 0"));
        }
        Ok(Self { center, radius })
    }

    fn parts(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let z: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let w = 1.0 - norm_sq(&z) / (self.radius * self.radius);
        (z, w)
    }
}

impl TestFunction for PolynomialBump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let (_, w) = self.parts(x);
        if w <= 0.0 {
            0.0
        } else {
            w * w * w
        }
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let (z, w) = self.parts(x);
        let r2 = self.radius * self.radius;
        DVector::from_iterator(
            self.dim(),
            z.iter().map(|zi| {
                if w <= 0.0 {
                    0.0
                } else {
                    -6.0 * w * w * zi / r2
                }
            }),
        )
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let (z, w) = self.parts(x);
        let r2 = self.radius * self.radius;
        if w <= 0.0 {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            let diag = if i == j { 1.0 } else { 0.0 };
            24.0 * w * z[i] * z[j] / (r2 * r2) - 6.0 * w * w * diag / r2
        })
    }
    fn support(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.center.clone(), self.radius))
    }
}

/// `exp(δ|x|_*^β)`.
#[derive(Debug, Clone)]
pub struct ExpPower {
    dim: usize,
    delta: f64,
    power: SmoothPower,
}

impl ExpPower {
    pub fn new(dim: usize, delta: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            dim,
            delta,
            power: SmoothPower::new(beta)?,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn beta(&self) -> f64 {
        self.power.exponent()
    }

    /// `log Z(x) = δ|x|_*^β`.
    pub fn log_value(&self, x: &[f64]) -> f64 {
        self.delta * self.power.value(x)
    }
}

impl TestFunction for ExpPower {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.log_value(x).exp()
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.power.gradient(x) * (self.delta * self.value(x))
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.power.gradient(x);
        let h = self.power.hessian(x);
        (h * self.delta + &g * g.transpose() * (self.delta * self.delta)) * self.value(x)
    }
}

/// `Σ aᵢ fᵢ`.
#[derive(Clone)]
pub struct LinearCombination {
    dim: usize,
    terms: Vec<(f64, Arc<dyn TestFunction>)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn TestFunction>)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, f)| f.dim())
            .ok_or_else(|| Error::invalid("empty linear combination"))?;
        if let Some((_, f)) = terms.iter().find(|(_, f)| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        Ok(Self { dim, terms })
    }
}

impl TestFunction for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, f)| a * f.value(x)).sum()
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.terms
            .iter()
            .fold(DVector::zeros(self.dim), |acc, (a, f)| {
                acc + f.gradient(x) * *a
            })
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.terms
            .iter()
            .fold(DMatrix::zeros(self.dim, self.dim), |acc, (a, f)| {
                acc + f.hessian(x) * *a
            })
    }
}

/// Largest relative mismatch between closed-form derivatives and central
/// differences, `|fd − exact| / max(1, |exact|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub gradient_error: f64,
    pub hessian_error: f64,
}

pub fn check_derivatives(f: &dyn TestFunction, points: &[Vec<f64>]) -> DerivativeCheck {
    let d = f.dim();
    let mut out = DerivativeCheck {
        gradient_error: 0.0,
        hessian_error: 0.0,
    };
    for x in points {
        let g = f.gradient(x);
        let hs = f.hessian(x);
        for k in 0..d {
            let h = 1e-5 * x[k].abs().max(1.0);
            let mut a = x.clone();
            let mut b = x.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (f.value(&a) - f.value(&b)) / (2.0 * h);
            out.gradient_error = out
                .gradient_error
                .max((fd - g[k]).abs() / g[k].abs().max(1.0));
            let dg = (f.gradient(&a) - f.gradient(&b)) / (2.0 * h);
            for l in 0..d {
                let e = (dg[l] - hs[(k, l)]).abs() / hs[(k, l)].abs().max(1.0);
                out.hessian_error = out.hessian_error.max(e);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn points(d: usize) -> Vec<Vec<f64>> {
        let mut v = Vec::new();
        for i in 0..7 {
            let t = -1.7 + 0.55 * i as f64;
            v.push(if d == 1 {
                vec![t]
            } else {
                vec![t, 0.3 - 0.4 * t]
            });
        }
        v
    }

    #[test]
    fn closed_form_derivatives_match_differences() {
        let fs: Vec<Box<dyn TestFunction>> = vec![
            Box::new(
                Polynomial::new(
                    2,
                    vec![(1.5, vec![2, 1]), (-0.5, vec![0, 3]), (2.0, vec![0, 0])],
                )
                .unwrap(),
            ),
            Box::new(GaussianBump::new(vec![0.2, -0.1], 0.7, 2.0).unwrap()),
            Box::new(PolynomialBump::new(vec![0.1, 0.0], 2.0).unwrap()),
            Box::new(ExpPower::new(2, 0.1, 1.5).unwrap()),
            Box::new(ExpPower::new(1, 0.2, 4.0).unwrap()),
        ];
        for f in &fs {
            let c = check_derivatives(f.as_ref(), &points(f.dim()));
            assert!(c.gradient_error < 1e-6, "{c:?}");
            assert!(c.hessian_error < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let b = PolynomialBump::new(vec![0.0], 1.0).unwrap();
        assert_eq!(b.value(&[1.0]), 0.0);
        assert_eq!(b.value(&[-3.0]), 0.0);
        assert_eq!(b.value(&[0.0]), 1.0);
        let g = GaussianBump::new(vec![0.0], 0.5, 1.0).unwrap();
        assert!(g.value(&[4.5]) < 1e-17);
    }

    proptest! {
        #[test]
        fn linear_combination_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -2.0f64..2.0) {
            let f: Arc<dyn TestFunction> = Arc::new(Polynomial::norm_squared(1));
            let g: Arc<dyn TestFunction> = Arc::new(GaussianBump::new(vec![0.5], 0.4, 1.0).unwrap());
            let h = LinearCombination::new(vec![(a, f.clone()), (b, g.clone())]).unwrap();
            let expect = a * f.hessian(&[x])[(0, 0)] + b * g.hessian(&[x])[(0, 0)];
            prop_assert!((h.hessian(&[x])[(0, 0)] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }
}
