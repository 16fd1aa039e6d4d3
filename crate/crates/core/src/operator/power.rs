//! Smoothed radial powers `|x|_*^s`.
//!
//! For `s = 0` and `s ≥ 2` the plain power is already `C²` and is used as is.
//! For `0 < s < 2` the inside of the unit ball is replaced by the quadratic
//! `q(u)` in `u = |x|²` matching `u^{s/2}` in value, first and second
//! derivative at `u = 1`.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothPower {
    exponent: f64,
    /// `q(u) = c0 + c1 (u-1) + c2 (u-1)²` on `u < 1`; `None` when the exact
    /// power is used everywhere.
    inner: Option<[f64; 3]>,
}

impl SmoothPower {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!(
                "smooth power exponent must be a finite s >= 0, got {exponent}"
            )));
        }
        let inner = if exponent > 0.0 && exponent < 2.0 {
            let c = exponent / 2.0;
            Some([1.0, c, 0.5 * c * (c - 1.0)])
        } else {
            None
        };
        Ok(Self { exponent, inner })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Coefficients of the inner quadratic, if one is used.
    pub fn inner_coefficients(&self) -> Option<[f64; 3]> {
        self.inner
    }

    /// Radial profile `φ(u)` and its first two derivatives, `u = |x|²`.
    pub fn profile(&self, u: f64) -> (f64, f64, f64) {
        let s = self.exponent;
        if s == 0.0 {
            return (1.0, 0.0, 0.0);
        }
        match self.inner {
            Some([c0, c1, c2]) if u < 1.0 => {
                let w = u - 1.0;
                (c0 + c1 * w + c2 * w * w, c1 + 2.0 * c2 * w, 2.0 * c2)
            }
            _ => {
                let c = s / 2.0;
                if u == 0.0 {
                    // only reached for s >= 2
                    let d1 = if c == 1.0 { 1.0 } else { 0.0 };
                    let d2 = if c == 2.0 { 2.0 } else { 0.0 };
                    return (0.0, d1, d2);
                }
                let v = u.powf(c);
                (v, c * v / u, c * (c - 1.0) * v / (u * u))
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(norm_sq(x)).0
    }

    /// Scalar version for `x ∈ ℝ`.
    pub fn value_scalar(&self, x: f64) -> f64 {
        self.profile(x * x).0
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let (_, d1, _) = self.profile(norm_sq(x));
        DVector::from_iterator(x.len(), x.iter().map(|xi| 2.0 * d1 * xi))
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let u = norm_sq(x);
        let (_, d1, d2) = self.profile(u);
        let d = x.len();
        // 4 φ''(u) x xᵀ: for 2 < s < 4 φ'' is singular at 0 but x xᵀ vanishes there
        let cross = if u == 0.0 { 0.0 } else { 4.0 * d2 };
        DMatrix::from_fn(d, d, |i, j| {
            let diag = if i == j { 2.0 * d1 } else { 0.0 };
            diag + cross * x[i] * x[j]
        })
    }

    /// Value, gradient and Hessian in one pass.
    pub fn jet(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        (self.value(x), self.gradient(x), self.hessian(x))
    }
}

/// Evaluates `|x|_*^s` (order 0), its gradient (order 1) or Hessian (order 2).
#[derive(Debug, Clone, PartialEq)]
pub enum PowerJet {
    Value(f64),
    Gradient(DVector<f64>),
    Hessian(DMatrix<f64>),
}

pub fn eval_smooth_power(s: f64, x: &[f64], order: u8) -> Result<PowerJet> {
    let p = SmoothPower::new(s)?;
    match order {
        0 => Ok(PowerJet::Value(p.value(x))),
        1 => Ok(PowerJet::Gradient(p.gradient(x))),
        2 => Ok(PowerJet::Hessian(p.hessian(x))),
        _ => Err(Error::invalid(format!(
            "derivative order must be 0, 1 or 2, got {order}"
        ))),
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}
