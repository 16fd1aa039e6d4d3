use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::report::{reduce_margins, AsymptoticCheck, CertificateReport};
use super::samples::SampleSet;
use crate::operator::{
    apply_jet, CoefficientField, ExpPower, OperatorVariant, RadialPowerLaw, SmoothPower,
    TestFunction,
};
use crate::{par, Error, Result};

/// Which operator pair a certificate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CertificateTarget {
    /// `𝒜Z ≤ M` and `ηΔZ + F·∇Z − VZ ≤ M`.
    #[default]
    WithPotential,
    /// `𝒜₀Z ≤ M` and `ηΔZ + F·∇Z ≤ M`.
    PotentialFree,
}

impl CertificateTarget {
    pub fn variants(self) -> [OperatorVariant; 2] {
        match self {
            Self::WithPotential => [OperatorVariant::Full, OperatorVariant::Comparison],
            Self::PotentialFree => [
                OperatorVariant::WithoutPotential,
                OperatorVariant::ComparisonWithoutPotential,
            ],
        }
    }
}

/// `Z = exp(δ|x|_*^β)` with an optional upper bound `M` for `𝒜Z`.
#[derive(Debug, Clone)]
pub struct StaticCertificate {
    z: ExpPower,
    power: SmoothPower,
    bound: Option<f64>,
    target: CertificateTarget,
}

impl StaticCertificate {
    pub fn new(dim: usize, delta: f64, beta: f64, target: CertificateTarget) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!(
                "certificate needs delta > 0, got {delta}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "certificate needs beta > 0, got {beta}"
            )));
        }
        Ok(Self {
            z: ExpPower::new(dim, delta, beta)?,
            power: SmoothPower::new(beta)?,
            bound: None,
            target,
        })
    }

    pub fn with_bound(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0) {
            return Err(Error::invalid(format!("bound M must be >= 0, got {m}")));
        }
        self.bound = Some(m);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }
    pub fn delta(&self) -> f64 {
        self.z.delta()
    }
    pub fn beta(&self) -> f64 {
        self.z.beta()
    }
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }
    pub fn target(&self) -> CertificateTarget {
        self.target
    }
    pub fn function(&self) -> &ExpPower {
        &self.z
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.z.value(x)
    }

    pub fn log_value(&self, x: &[f64]) -> f64 {
        self.z.log_value(x)
    }

    /// `log inf_{|y| ≥ R} Z(y)`; `Z` is radially increasing.
    pub fn log_inf_outside(&self, radius: f64) -> f64 {
        self.delta() * self.power.value_scalar(radius.max(0.0))
    }

    /// `(∇Z/Z, D²Z/Z)`.
    pub fn normalized_jet(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.delta();
        let g = self.power.gradient(x);
        let h = self.power.hessian(x) * d + &g * g.transpose() * (d * d);
        (g * d, h)
    }

    /// `L Z / Z` for the given operator variant.
    pub fn normalized_action(
        &self,
        field: &CoefficientField,
        s: f64,
        x: &[f64],
        variant: OperatorVariant,
    ) -> f64 {
        let (g, h) = self.normalized_jet(x);
        apply_jet(field, s, x, 1.0, &g, &h, variant)
    }

    /// Largest sampled value of the two certified left-hand sides, clamped at 0.
    pub fn estimate_bound(&self, field: &CoefficientField, samples: &SampleSet) -> Result<f64> {
        check_dims(field, self)?;
        let vals = par::map_collect(&samples.points, |(s, x)| {
            let z = self.value(x);
            self.target
                .variants()
                .iter()
                .map(|&v| self.normalized_action(field, *s, x, v) * z)
                .fold(f64::NEG_INFINITY, f64::max)
        });
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// Merged power-law expansion of `L Z / Z` for `|x| ≥ 1`.
    pub fn asymptotic_check(
        &self,
        law: &RadialPowerLaw,
        eta: f64,
        variant: OperatorVariant,
    ) -> AsymptoticCheck {
        asymptotic_expansion(law, self.dim(), eta, self.delta(), self.beta(), variant)
    }
}

fn check_dims(field: &CoefficientField, cert: &StaticCertificate) -> Result<()> {
    if field.dim() != cert.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: cert.dim(),
        });
    }
    Ok(())
}

/// Expansion of `L exp(δ|x|^β) / exp(δ|x|^β)` for `Q = (a₀ + a₁|x|^m)I`,
/// `F = −b|x|^{p−1}x`, `V = c|x|^r`. Comparison variants replace `Q` by `ηI`.
pub fn asymptotic_expansion(
    law: &RadialPowerLaw,
    dim: usize,
    eta: f64,
    delta: f64,
    beta: f64,
    variant: OperatorVariant,
) -> AsymptoticCheck {
    let (a0, a1, m) = match variant {
        OperatorVariant::Full | OperatorVariant::WithoutPotential => {
            (law.diffusion_const, law.diffusion_coef, law.diffusion_exp)
        }
        _ => (eta, 0.0, 0.0),
    };
    let d = dim as f64;
    let lap = delta * beta * (d + beta - 2.0);
    let sq = delta * delta * beta * beta;
    let mut raw = vec![
        (beta - 2.0, lap * a0),
        (2.0 * beta - 2.0, sq * a0),
        (m + beta - 2.0, lap * a1),
        (m + 2.0 * beta - 2.0, sq * a1),
        (law.drift_exp + beta - 1.0, -law.drift_coef * delta * beta),
    ];
    if variant.uses_potential() {
        raw.push((law.potential_exp, -law.potential_coef));
    }
    raw.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for (e, c) in raw {
        match terms.last_mut() {
            Some(last) if (last.0 - e).abs() <= 1e-12 * (1.0 + e.abs()) => last.1 += c,
            _ => terms.push((e, c)),
        }
    }
    let scale = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
    terms.retain(|t| t.1.abs() > 1e-14 * scale.max(1e-300));
    let (leading_exponent, leading_coefficient) = terms.first().copied().unwrap_or((0.0, 0.0));
    AsymptoticCheck {
        pass: leading_coefficient < 0.0,
        leading_exponent,
        leading_coefficient,
        terms,
    }
}

/// Checks `L Z ≤ M` for both operators of the certificate's target at every
/// sample. Without a stored `M`, the sampled maximum is used and the grid
/// margin is zero by construction; the verdict then rests on the asymptotic
/// sign check, which runs whenever the field has a radial power law.
pub fn check_static_certificate(
    field: &CoefficientField,
    cert: &StaticCertificate,
    samples: &SampleSet,
) -> Result<CertificateReport> {
    check_dims(field, cert)?;
    if samples.is_empty() {
        return Err(Error::invalid("static certificate check needs samples"));
    }
    let variants = cert.target.variants();
    let lhs: Vec<Vec<f64>> = par::map_collect(&samples.points, |(s, x)| {
        let z = cert.value(x);
        variants
            .iter()
            .map(|&v| cert.normalized_action(field, *s, x, v) * z)
            .collect()
    });
    let sampled_max = lhs.iter().flatten().copied().fold(0.0, f64::max);
    let m = cert.bound.unwrap_or(sampled_max);
    let margins: Vec<Vec<f64>> = lhs
        .iter()
        .map(|row| row.iter().map(|l| m - l).collect())
        .collect();
    let names = match cert.target {
        CertificateTarget::WithPotential => ["A Z <= M", "comparison Z <= M"],
        CertificateTarget::PotentialFree => ["A0 Z <= M", "comparison0 Z <= M"],
    };
    let (worst, argmin, named) = reduce_margins(&names, &samples.points, &margins);

    let mut notes = Vec::new();
    let mut pass = m.is_finite() && worst >= -1e-10 * m.max(1.0);
    if !m.is_finite() {
        notes.push("bound M is not finite on the sample grid".to_string());
    }
    if cert.delta() * cert.beta() >= 1.0 {
        notes.push(format!(
            "delta*beta = {} is not below 1",
            cert.delta() * cert.beta()
        ));
    }

    let mut asymptotic = Vec::new();
    if let Some(law) = field.power_law() {
        for &v in &variants {
            let chk = cert.asymptotic_check(&law, field.eta(), v);
            if !chk.pass {
                pass = false;
                notes.push(format!(
                    "negative leading coefficient violated for {v:?}: coefficient {:.6e} at |x|^{:.4}",
                    chk.leading_coefficient, chk.leading_exponent
                ));
            }
            asymptotic.push(chk);
        }
    } else {
        notes.push("no radial power law available; asymptotic sign check skipped".to_string());
    }

    // Radial growth beyond |x| = 1 along a coordinate ray.
    let r_max = samples
        .points
        .iter()
        .map(|(_, x)| crate::operator::norm(x))
        .fold(1.0, f64::max);
    let growth = (0..=64).map(|i| {
        let r = 1.0 + (r_max - 1.0) * i as f64 / 64.0;
        let mut x = vec![0.0; cert.dim()];
        x[0] = r;
        cert.log_value(&x)
    });
    let monotone = growth.collect::<Vec<_>>().windows(2).all(|w| w[1] >= w[0]);
    if !monotone {
        pass = false;
        notes.push("Z is not radially increasing beyond |x| = 1".to_string());
    }

    Ok(CertificateReport {
        pass,
        worst_margin: worst,
        argmin,
        n_samples: samples.len(),
        margins: named,
        bound_m: Some(m),
        asymptotic,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_sign_for_example_case_one() {
        let law = CoefficientField::example(1.0, 3.0, 2.0, 1)
            .unwrap()
            .power_law()
            .unwrap();
        let good = asymptotic_expansion(&law, 1, 1.0, 0.3, 3.0, OperatorVariant::Full);
        assert!(good.pass);
        assert_eq!(good.leading_exponent, 5.0);
        assert!((good.leading_coefficient - 0.9 * (0.9 - 1.0)).abs() < 1e-12);
        let bad = asymptotic_expansion(&law, 1, 1.0, 0.4, 3.0, OperatorVariant::Full);
        assert!(!bad.pass);
    }

    #[test]
    fn zero_diffusion_exponent_doubles_the_quadratic_term() {
        let law = CoefficientField::example(0.0, 3.0, 2.0, 1)
            .unwrap()
            .power_law()
            .unwrap();
        let chk = asymptotic_expansion(&law, 1, 1.0, 0.2, 4.0, OperatorVariant::Full);
        assert_eq!(chk.leading_exponent, 6.0);
        assert!((chk.leading_coefficient - (2.0 * 0.64 - 0.8)).abs() < 1e-12);
        let chk = asymptotic_expansion(&law, 1, 1.0, 0.2, 4.0, OperatorVariant::Comparison);
        assert!(chk.pass);
    }

    #[test]
    fn laplacian_certificate_is_unbounded() {
        let lap = CoefficientField::laplacian(1);
        let cert = StaticCertificate::new(1, 0.05, 2.0, CertificateTarget::WithPotential).unwrap();
        let samples = SampleSet::tensor(1, 0.0, 1.0, 2, 4.0, 33);
        let rep = check_static_certificate(&lap, &cert, &samples).unwrap();
        assert!(!rep.pass);
        assert!(rep.bound_m.unwrap().is_finite());
        assert!(rep
            .notes
            .iter()
            .any(|n| n.contains("negative leading coefficient")));
    }

    #[test]
    fn normalized_action_matches_direct_application() {
        let field = CoefficientField::example(1.0, 2.5, 1.0, 2).unwrap();
        let cert = StaticCertificate::new(2, 0.2, 2.5, CertificateTarget::WithPotential).unwrap();
        for x in [[0.3, -0.2], [1.5, 0.7], [-2.0, 1.0]] {
            let direct = crate::operator::apply_operator(
                &field,
                cert.function(),
                0.0,
                &x,
                OperatorVariant::Full,
            )
            .unwrap();
            let norm =
                cert.normalized_action(&field, 0.0, &x, OperatorVariant::Full) * cert.value(&x);
            assert!((direct - norm).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}
