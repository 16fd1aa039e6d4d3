use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::report::{reduce_margins, CertificateReport};
use super::samples::SampleSet;
use super::static_cert::{CertificateTarget, StaticCertificate};
use crate::operator::{apply_jet, CoefficientField, OperatorVariant, SmoothPower};
use crate::{par, Error, Result};

/// Parameter case of the exponential construction: `β = p+1−m` (i) or
/// `β = (r+2−m)/2` (ii).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovCase {
    I,
    II,
}

/// `h(s) = C̃ (t−s)^{e_h}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub coefficient: f64,
    pub exponent: f64,
    pub t: f64,
    /// The cutoff constant `C` used in the derivation (0 when not derived).
    pub cutoff: f64,
}

impl RateFunction {
    pub fn zero(t: f64) -> Self {
        Self {
            coefficient: 0.0,
            exponent: 0.0,
            t,
            cutoff: 0.0,
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.coefficient *= factor;
        self
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.coefficient == 0.0 {
            return 0.0;
        }
        self.coefficient * (self.t - s).powf(self.exponent)
    }

    /// `∫_s^t h`, finite when `e_h > −1`.
    pub fn integral_to_t(&self, s: f64) -> f64 {
        if self.coefficient == 0.0 {
            return 0.0;
        }
        let e1 = self.exponent + 1.0;
        self.coefficient * (self.t - s).max(0.0).powf(e1) / e1
    }

    /// `∫_{s₀}^{s₁} h`.
    pub fn integral(&self, s0: f64, s1: f64) -> f64 {
        self.integral_to_t(s0) - self.integral_to_t(s1)
    }
}

/// Inputs of the exponential time-dependent construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WParameters {
    pub m: f64,
    pub p: f64,
    pub r: f64,
    pub dim: usize,
    pub case: LyapunovCase,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub t: f64,
}

impl WParameters {
    pub fn beta(&self) -> f64 {
        match self.case {
            LyapunovCase::I => self.p + 1.0 - self.m,
            LyapunovCase::II => (self.r + 2.0 - self.m) / 2.0,
        }
    }

    pub fn alpha0(&self) -> f64 {
        let beta = self.beta();
        if self.case == LyapunovCase::II && self.m + self.r <= 2.0 {
            beta / (self.p - 1.0)
        } else {
            beta / (self.m + beta - 2.0)
        }
    }

    /// Checks every parameter constraint, naming the first violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.p > 1.0) {
            return fail(format!("p > 1 violated (p = {})", self.p));
        }
        if !(self.m >= 0.0 && self.r >= 0.0) {
            return fail("m >= 0 and r >= 0 required".into());
        }
        match self.case {
            LyapunovCase::I if !(self.p > self.m - 1.0) => {
                return fail(format!(
                    "case (i) requires p > m - 1 (p = {}, m = {})",
                    self.p, self.m
                ))
            }
            LyapunovCase::II if !(self.r > self.m - 2.0) => {
                return fail(format!(
                    "case (ii) requires r > m - 2 (r = {}, m = {})",
                    self.r, self.m
                ))
            }
            _ => {}
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return fail(format!("terminal time must lie in (0,1], got {}", self.t));
        }
        let beta = self.beta();
        if !(self.eps > 0.0) {
            return fail(format!("0 < eps violated (eps = {})", self.eps));
        }
        if !(self.eps < self.delta) {
            return fail(format!(
                "eps < delta violated (eps = {}, delta = {})",
                self.eps, self.delta
            ));
        }
        if !(self.delta * beta < 1.0) {
            return fail(format!(
                "delta < 1/beta violated (delta = {}, beta = {beta}): negative leading coefficient delta*beta - 1 fails",
                self.delta
            ));
        }
        let a0 = self.alpha0();
        if !(self.alpha > a0) {
            return fail(format!(
                "alpha > alpha0 violated (alpha = {}, alpha0 = {a0})",
                self.alpha
            ));
        }
        Ok(())
    }
}

/// Closed-form rate `h(s) = C̃(t−s)^{e_h}` for the exponential `W`.
pub fn derive_h(w: &WParameters) -> RateFunction {
    let (m, p, d) = (w.m, w.p, w.dim as f64);
    let (eps, delta, alpha) = (w.eps, w.delta, w.alpha);
    let beta = w.beta();
    let gap = m + beta - 2.0;
    if gap > 0.0 {
        let c = ((delta - eps) * beta * beta / alpha).powf(-1.0 / gap);
        let coefficient = eps * alpha * c.powf(beta)
            + 2.0 * eps * beta * c.powf(gap) * (d + beta - 2.0)
            + 2.0 * eps * eps * beta * beta * c.powf(m + 2.0 * beta - 2.0);
        RateFunction {
            coefficient,
            exponent: alpha - 1.0 - beta / gap,
            t: w.t,
            cutoff: c,
        }
    } else {
        let c = ((alpha + 2.0 * beta) / beta).powf(1.0 / (p - 1.0));
        let coefficient =
            eps * c.powf(beta) * (alpha + 2.0 * beta) + 2.0 * (d + beta - 2.0).max(0.0);
        RateFunction {
            coefficient,
            exponent: alpha - 1.0 - beta / (p - 1.0),
            t: w.t,
            cutoff: c,
        }
    }
}

/// `W(s,x) = exp(ε(t−s)^α|x|_*^β)` with rate `h`.
#[derive(Debug, Clone)]
pub struct TimeDependentLyapunov {
    dim: usize,
    t: f64,
    eps: f64,
    alpha: f64,
    power: SmoothPower,
    rate: RateFunction,
    dominating: Option<StaticCertificate>,
    params: Option<WParameters>,
}

impl TimeDependentLyapunov {
    /// General exponential family; `β = 0` gives the purely temporal weight
    /// `exp(ε(t−s)^α)` and `ε = 0` gives `W ≡ 1`.
    pub fn new(
        dim: usize,
        t: f64,
        eps: f64,
        alpha: f64,
        beta: f64,
        rate: RateFunction,
    ) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::invalid(format!(
                "terminal time must lie in (0,1], got {t}"
            )));
        }
        if !(eps >= 0.0 && alpha > 0.0) {
            return Err(Error::invalid("W needs eps >= 0 and alpha > 0"));
        }
        Ok(Self {
            dim,
            t,
            eps,
            alpha,
            power: SmoothPower::new(beta)?,
            rate,
            dominating: None,
            params: None,
        })
    }

    pub fn with_rate(mut self, rate: RateFunction) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_dominating(mut self, z: StaticCertificate) -> Self {
        self.dominating = Some(z);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.power.exponent()
    }
    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }
    pub fn dominating(&self) -> Option<&StaticCertificate> {
        self.dominating.as_ref()
    }
    pub fn parameters(&self) -> Option<&WParameters> {
        self.params.as_ref()
    }

    /// `ε(t−s)^α`.
    pub fn weight(&self, s: f64) -> f64 {
        self.eps * (self.t - s).max(0.0).powf(self.alpha)
    }

    pub fn log_value(&self, s: f64, x: &[f64]) -> f64 {
        let w = self.weight(s);
        if w == 0.0 {
            0.0
        } else {
            w * self.power.value(x)
        }
    }

    pub fn value(&self, s: f64, x: &[f64]) -> f64 {
        self.log_value(s, x).exp()
    }

    /// `∂ₛW / W = −εα(t−s)^{α−1}|x|_*^β`.
    pub fn normalized_time_derivative(&self, s: f64, x: &[f64]) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        -self.eps * self.alpha * (self.t - s).powf(self.alpha - 1.0) * self.power.value(x)
    }

    /// `(∇W/W, D²W/W)`.
    pub fn normalized_jet(&self, s: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let w = self.weight(s);
        let g = self.power.gradient(x);
        let h = self.power.hessian(x) * w + &g * g.transpose() * (w * w);
        (g * w, h)
    }

    /// `[∂ₛW − L W + hW] / W` for the given operator.
    pub fn normalized_slack(
        &self,
        field: &CoefficientField,
        s: f64,
        x: &[f64],
        variant: OperatorVariant,
    ) -> f64 {
        let (g, h) = self.normalized_jet(s, x);
        self.normalized_time_derivative(s, x) - apply_jet(field, s, x, 1.0, &g, &h, variant)
            + self.rate.eval(s)
    }
}

/// Builds `W` for the example family with `h` from [`derive_h`] and the
/// dominating certificate `Z = exp(δ|x|_*^β)`.
pub fn build_time_dependent_w(params: WParameters) -> Result<TimeDependentLyapunov> {
    params.validate()?;
    let beta = params.beta();
    let z = StaticCertificate::new(
        params.dim,
        params.delta,
        beta,
        CertificateTarget::WithPotential,
    )?;
    let rate = derive_h(&params);
    let mut w =
        TimeDependentLyapunov::new(params.dim, params.t, params.eps, params.alpha, beta, rate)?
            .with_dominating(z);
    w.params = Some(params);
    Ok(w)
}

/// Checks `∂ₛW − 𝒜W ≥ −hW` and the same with `ηΔ + F·∇ − V` at every sample,
/// plus `W ≤ Z^{ε/δ} ≤ Z` when a dominating certificate is attached.
pub fn check_time_dependent(
    field: &CoefficientField,
    w: &TimeDependentLyapunov,
    samples: &SampleSet,
) -> Result<CertificateReport> {
    if field.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: w.dim(),
        });
    }
    if samples.is_empty() {
        return Err(Error::invalid("time-dependent check needs samples"));
    }
    if let Some((s, _)) = samples.points.iter().find(|(s, _)| *s >= w.t()) {
        return Err(Error::invalid(format!(
            "sample time s = {s} is not below the terminal time {}",
            w.t()
        )));
    }
    let margins: Vec<Vec<f64>> = par::map_collect(&samples.points, |(s, x)| {
        vec![
            w.normalized_slack(field, *s, x, OperatorVariant::Full),
            w.normalized_slack(field, *s, x, OperatorVariant::Comparison),
        ]
    });
    let (worst, argmin, named) = reduce_margins(&["star", "star-star"], &samples.points, &margins);
    let mut pass = worst >= -1e-8;
    let mut notes = Vec::new();
    if let Some(z) = w.dominating() {
        let ratio = w.eps() / z.delta();
        let bad = samples.points.iter().find(|(s, x)| {
            let lw = w.log_value(*s, x);
            let lz = z.log_value(x);
            lw > ratio * lz + 1e-12 * (1.0 + lz.abs()) || ratio * lz > lz + 1e-12 * (1.0 + lz.abs())
        });
        if let Some((s, x)) = bad {
            pass = false;
            notes.push(format!(
                "domination W <= Z^(eps/delta) <= Z fails at s = {s}, x = {x:?}"
            ));
        }
        if !(w.eps() < z.delta()) {
            pass = false;
            notes.push("eps < delta violated".into());
        }
    }
    if !(w.rate().exponent > -1.0) && w.rate().coefficient != 0.0 {
        pass = false;
        notes.push(format!(
            "rate exponent {} is not above -1",
            w.rate().exponent
        ));
    }
    Ok(CertificateReport {
        pass,
        worst_margin: worst,
        argmin,
        n_samples: samples.len(),
        margins: named,
        bound_m: None,
        asymptotic: Vec::new(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64) -> WParameters {
        WParameters {
            m: 0.0,
            p: 3.0,
            r: 2.0,
            dim: 1,
            case: LyapunovCase::I,
            eps: 0.1,
            delta: 0.2,
            alpha,
            t: 1.0,
        }
    }

    #[test]
    fn rate_for_example_case_one() {
        let h = derive_h(&params(2.5));
        assert!((h.exponent + 0.5).abs() < 1e-15);
        assert!((h.cutoff - 1.25).abs() < 1e-12);
        let expect = 0.1 * 2.5 * 1.25f64.powi(4)
            + 2.0 * 0.1 * 4.0 * 1.25f64.powi(2) * 3.0
            + 2.0 * 0.01 * 16.0 * 1.25f64.powi(6);
        assert!((h.coefficient - expect).abs() < 1e-12);
    }

    #[test]
    fn alpha_threshold_is_strict() {
        assert_eq!(params(2.0).alpha0(), 2.0);
        assert!(build_time_dependent_w(params(2.0)).is_err());
        assert!(build_time_dependent_w(params(2.0 + 1e-9)).is_ok());
    }

    #[test]
    fn rejects_large_delta_with_named_constraint() {
        let mut p = params(2.5);
        p.delta = 0.3;
        let err = build_time_dependent_w(p).unwrap_err().to_string();
        assert!(err.contains("delta < 1/beta"), "{err}");
    }

    #[test]
    fn exponent_tends_to_minus_one_at_threshold() {
        let h = derive_h(&params(2.0 + 1e-9));
        assert!(h.exponent > -1.0 && h.exponent < -1.0 + 1e-8);
    }

    #[test]
    fn w_is_one_at_terminal_time() {
        let w = build_time_dependent_w(params(2.5)).unwrap();
        assert_eq!(w.value(1.0, &[3.0]), 1.0);
        assert!(w.value(0.5, &[3.0]) > 1.0);
    }
}
