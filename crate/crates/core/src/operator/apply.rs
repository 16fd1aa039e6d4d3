use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::field::CoefficientField;
use super::test_fn::TestFunction;
use crate::{par, Error, Result};

/// Which second-order operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorVariant {
    /// `Tr(Q D²) + F·∇ − V`.
    Full,
    /// `Tr(Q D²) + F·∇`.
    WithoutPotential,
    /// `ηΔ + F·∇ − V`.
    Comparison,
    /// `ηΔ + F·∇`.
    ComparisonWithoutPotential,
}

impl OperatorVariant {
    pub fn uses_potential(self) -> bool {
        matches!(self, Self::Full | Self::Comparison)
    }
}

/// Applies the operator to a function given through its 2-jet at `x`.
pub fn apply_jet(
    field: &CoefficientField,
    s: f64,
    x: &[f64],
    value: f64,
    gradient: &DVector<f64>,
    hessian: &DMatrix<f64>,
    variant: OperatorVariant,
) -> f64 {
    let second = match variant {
        OperatorVariant::Full | OperatorVariant::WithoutPotential => {
            field.diffusion(s, x).component_mul(hessian).sum()
        }
        _ => field.eta() * hessian.trace(),
    };
    let first = field.drift(s, x).dot(gradient);
    let zeroth = if variant.uses_potential() {
        field.potential(s, x) * value
    } else {
        0.0
    };
    second + first - zeroth
}

pub fn apply_operator(
    field: &CoefficientField,
    f: &dyn TestFunction,
    s: f64,
    x: &[f64],
    variant: OperatorVariant,
) -> Result<f64> {
    if f.dim() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: f.dim(),
        });
    }
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            found: x.len(),
        });
    }
    Ok(apply_jet(
        field,
        s,
        x,
        f.value(x),
        &f.gradient(x),
        &f.hessian(x),
        variant,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub pass: bool,
    /// `min λ_min(Q) − η` over samples.
    pub min_margin: f64,
    pub argmin: Vec<f64>,
    pub violations: Vec<Vec<f64>>,
    /// Largest `‖Q − Qᵀ‖` seen.
    pub max_asymmetry: f64,
    pub min_potential: f64,
    pub n_samples: usize,
}

/// Smallest eigenvalue of `Q − ηI` at each `(s, x)`; violations are `[s, x…]`
/// records with margin below `−1e−10` or asymmetry above `1e−12`.
pub fn check_ellipticity(
    field: &CoefficientField,
    samples: &[(f64, Vec<f64>)],
) -> Result<EllipticityReport> {
    if samples.is_empty() {
        return Err(Error::invalid(
            "ellipticity check needs at least one sample",
        ));
    }
    let eta = field.eta();
    let rows = par::map_collect(samples, |(s, x)| {
        let q = field.diffusion(*s, x);
        let asym = (&q - q.transpose()).norm();
        let sym = (&q + q.transpose()) * 0.5;
        let lmin = sym.symmetric_eigenvalues().min();
        (lmin - eta, asym, field.potential(*s, x))
    });
    let mut report = EllipticityReport {
        pass: true,
        min_margin: f64::INFINITY,
        argmin: Vec::new(),
        violations: Vec::new(),
        max_asymmetry: 0.0,
        min_potential: f64::INFINITY,
        n_samples: samples.len(),
    };
    for ((s, x), (margin, asym, v)) in samples.iter().zip(rows) {
        let mut point = vec![*s];
        point.extend_from_slice(x);
        if margin < report.min_margin || margin.is_nan() {
            report.min_margin = margin;
            report.argmin = point.clone();
        }
        report.max_asymmetry = report.max_asymmetry.max(asym);
        report.min_potential = report.min_potential.min(v);
        if !(margin >= -1e-10) || asym > 1e-12 {
            report.violations.push(point);
        }
    }
    report.pass = report.violations.is_empty();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::field::CustomCoefficients;
    use crate::operator::test_fn::{GaussianBump, Polynomial};

    #[test]
    fn laplacian_of_square_is_two() {
        let lap = CoefficientField::laplacian(1);
        let f = Polynomial::norm_squared(1);
        for x in [-3.0, 0.0, 1.7] {
            assert_eq!(
                apply_operator(&lap, &f, 0.5, &[x], OperatorVariant::Full).unwrap(),
                2.0
            );
        }
    }

    #[test]
    fn example_operator_on_square_at_one() {
        let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
        let f = Polynomial::norm_squared(1);
        let v = apply_operator(&field, &f, 0.0, &[1.0], OperatorVariant::Full).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        let c = apply_operator(&field, &f, 0.0, &[1.0], OperatorVariant::Comparison).unwrap();
        assert!((c - (2.0 - 2.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn potential_free_variant_adds_vf() {
        let field = CoefficientField::example(1.0, 2.5, 1.5, 2).unwrap();
        let f = GaussianBump::new(vec![0.3, -0.2], 0.8, 1.0).unwrap();
        for x in [[0.0, 0.0], [1.2, -0.7], [-2.0, 0.4]] {
            let full = apply_operator(&field, &f, 0.1, &x, OperatorVariant::Full).unwrap();
            let free =
                apply_operator(&field, &f, 0.1, &x, OperatorVariant::WithoutPotential).unwrap();
            let vf = field.potential(0.1, &x) * f.value(&x);
            assert!((free - full - vf).abs() <= 1e-12 * (1.0 + vf.abs()));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let field = CoefficientField::laplacian(2);
        let f = Polynomial::norm_squared(1);
        assert!(apply_operator(&field, &f, 0.0, &[0.0, 0.0], OperatorVariant::Full).is_err());
    }

    #[test]
    fn ellipticity_margins() {
        let lap = CoefficientField::laplacian(1);
        let rep = check_ellipticity(&lap, &[(0.0, vec![0.0]), (0.5, vec![3.0])]).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.min_margin, 0.0);

        let field = CoefficientField::example(2.0, 3.0, 2.0, 1).unwrap();
        let rep = check_ellipticity(&field, &[(0.0, vec![2.0])]).unwrap();
        assert!((rep.min_margin - 4.0).abs() < 1e-12);

        let c = CustomCoefficients::parse(1, &["0.5".into()], &["0".into()], "0").unwrap();
        let bad = CoefficientField::new(c, 1.0).unwrap();
        let rep = check_ellipticity(&bad, &[(0.0, vec![0.0]), (0.0, vec![1.0])]).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.violations.len(), 2);
        assert!((rep.min_margin + 0.5).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_diffusion_is_flagged() {
        let c = CustomCoefficients::parse(
            2,
            &["2".into(), "0.1".into(), "0".into(), "2".into()],
            &["0".into(), "0".into()],
            "0",
        )
        .unwrap();
        let field = CoefficientField::new(c, 1.0).unwrap();
        let rep = check_ellipticity(&field, &[(0.0, vec![0.0, 0.0])]).unwrap();
        assert!(!rep.pass);
        assert!(rep.max_asymmetry > 0.1);
    }
}
