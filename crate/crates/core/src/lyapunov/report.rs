use serde::{Deserialize, Serialize};

/// Leading-order sign analysis of `𝒜Z/Z` as `|x| → ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCheck {
    pub pass: bool,
    pub leading_exponent: f64,
    pub leading_coefficient: f64,
    /// Merged `(exponent, coefficient)` pairs, highest exponent first.
    pub terms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub pass: bool,
    pub worst_margin: f64,
    /// `[s, x₁, …]` of the worst sample.
    pub argmin: Vec<f64>,
    pub n_samples: usize,
    /// Worst margin of each checked inequality, by name.
    pub margins: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub asymptotic: Vec<AsymptoticCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Sequential min-reduction of per-sample margins, so the result does not
/// depend on how the evaluation was partitioned.
pub(crate) fn reduce_margins(
    names: &[&str],
    points: &[(f64, Vec<f64>)],
    margins: &[Vec<f64>],
) -> (f64, Vec<f64>, Vec<(String, f64)>) {
    let mut worst = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut per = vec![f64::INFINITY; names.len()];
    for ((s, x), row) in points.iter().zip(margins) {
        for (slot, &m) in per.iter_mut().zip(row) {
            if m < *slot || m.is_nan() {
                *slot = m;
            }
        }
        let m = row.iter().copied().fold(
            f64::INFINITY,
            |a, b| if b < a || b.is_nan() { b } else { a },
        );
        if m < worst || (m.is_nan() && !worst.is_nan()) {
            worst = m;
            argmin = std::iter::once(*s).chain(x.iter().copied()).collect();
        }
    }
    let named = names.iter().map(|n| n.to_string()).zip(per).collect();
    (worst, argmin, named)
}
