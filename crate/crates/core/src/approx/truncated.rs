use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::cutoff::CutoffProfile;
use crate::lyapunov::TimeDependentLyapunov;
use crate::operator::{CoefficientField, Coefficients};
use crate::{Error, Result};

/// `𝒜ₙ` with `q⁽ⁿ⁾ = φₙq + (1−φₙ)ηI`, `φₙ(s,x) = φ(W₁(s,x)/n)`; drift and
/// potential are those of the base field.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    pub base: CoefficientField,
    pub level: f64,
    pub w1: TimeDependentLyapunov,
    field: CoefficientField,
    inner: Arc<TruncatedCoefficients>,
}

#[derive(Debug)]
struct TruncatedCoefficients {
    base: CoefficientField,
    log_level: f64,
    w1: TimeDependentLyapunov,
    profile: Arc<CutoffProfile>,
}

impl TruncatedCoefficients {
    /// `(φₙ, φ′(W₁/n)·W₁/n)`; computed in logs so huge `W₁` never overflows.
    fn cutoff(&self, s: f64, x: &[f64]) -> (f64, f64) {
        let l = self.w1.log_value(s, x) - self.log_level;
        if l >= std::f64::consts::LN_2 {
            return (0.0, 0.0);
        }
        let a = l.exp();
        (self.profile.value(a), self.profile.derivative(a) * a)
    }
}

impl Coefficients for TruncatedCoefficients {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn diffusion(&self, s: f64, x: &[f64]) -> DMatrix<f64> {
        let (phi, _) = self.cutoff(s, x);
        let d = self.base.dim();
        if phi == 1.0 {
            return self.base.diffusion(s, x);
        }
        let eta = DMatrix::identity(d, d) * self.base.eta();
        if phi == 0.0 {
            return eta;
        }
        self.base.diffusion(s, x) * phi + eta * (1.0 - phi)
    }

    fn diffusion_derivative(&self, s: f64, x: &[f64], k: usize) -> DMatrix<f64> {
        let (phi, slope) = self.cutoff(s, x);
        let d = self.base.dim();
        if phi == 0.0 {
            return DMatrix::zeros(d, d);
        }
        let mut out = self.base.diffusion_derivative(s, x, k) * phi;
        if slope != 0.0 {
            let dlog = self.w1.normalized_jet(s, x).0[k];
            let gap = self.base.diffusion(s, x) - DMatrix::identity(d, d) * self.base.eta();
            out += gap * (slope * dlog);
        }
        out
    }

    fn drift(&self, s: f64, x: &[f64]) -> DVector<f64> {
        self.base.drift(s, x)
    }

    fn potential(&self, s: f64, x: &[f64]) -> f64 {
        self.base.potential(s, x)
    }

    fn is_autonomous(&self) -> bool {
        self.base.is_autonomous() && self.w1.eps() == 0.0
    }
}

pub fn build_truncated_operator(
    field: &CoefficientField,
    level: f64,
    w1: &TimeDependentLyapunov,
    profile: Arc<CutoffProfile>,
) -> Result<TruncatedOperator> {
    if !(level >= 1.0 && level.is_finite()) {
        return Err(Error::invalid(format!(
            "truncation level must be a finite n >= 1, got {level}"
        )));
    }
    if w1.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: w1.dim(),
        });
    }
    let inner = Arc::new(TruncatedCoefficients {
        base: field.clone(),
        log_level: level.ln(),
        w1: w1.clone(),
        profile,
    });
    let field_n = CoefficientField::from_arc(inner.clone() as Arc<dyn Coefficients>, field.eta())?
        .with_holder_exponent(field.holder_exponent())?;
    Ok(TruncatedOperator {
        base: field.clone(),
        level,
        w1: w1.clone(),
        field: field_n,
        inner,
    })
}

impl TruncatedOperator {
    /// The operator `𝒜ₙ` as a coefficient field with the base `η`.
    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    /// `φₙ(s,x)`.
    pub fn cutoff(&self, s: f64, x: &[f64]) -> f64 {
        self.inner.cutoff(s, x).0
    }
}

/// `(2c₂, c₃ + ηc₈, c₅ + 4c₉)`.
pub fn remap_constants(c2: f64, c3: f64, c5: f64, c8: f64, c9: f64, eta: f64) -> (f64, f64, f64) {
    (2.0 * c2, c3 + eta * c8, c5 + 4.0 * c9)
}

/// `c₁…c₉` with `c₂, c₃, c₅` remapped and the rest passed through.
pub fn remap_all(c: &[f64; 9], eta: f64) -> [f64; 9] {
    let (c2, c3, c5) = remap_constants(c[1], c[2], c[4], c[7], c[8], eta);
    let mut out = *c;
    out[1] = c2;
    out[2] = c3;
    out[4] = c5;
    out
}
