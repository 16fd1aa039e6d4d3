use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::window::TimeWindow;
use crate::operator::SmoothPower;
use crate::solver::KernelSlice;
use crate::{par, Error, Result};

/// Parameter regime of the kernel bound for the example family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSelection {
    /// 1 when `p ≥ (m+r)/2`, else 2.
    pub regime: u8,
    pub m: f64,
    pub p: f64,
    pub r: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub eps_max: f64,
    /// `Λ = m ∨ p ∨ r/2`.
    pub lambda: f64,
}

impl RegimeSelection {
    /// Formulas of the requested regime, whatever `(m, p, r)` say.
    pub fn forced(m: f64, p: f64, r: f64, regime: u8) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::invalid(format!("p > 1 violated (p = {p})")));
        }
        if !(p > m - 1.0) {
            return Err(Error::invalid(format!(
                "p > m - 1 violated (p = {p}, m = {m})"
            )));
        }
        if !(r > m - 2.0) {
            return Err(Error::invalid(format!(
                "r > m - 2 violated (r = {r}, m = {m})"
            )));
        }
        if !(m >= 0.0 && r >= 0.0) {
            return Err(Error::invalid("m >= 0 and r >= 0 required"));
        }
        let lambda = m.max(p).max(0.5 * r);
        let sel = match regime {
            1 => {
                let beta = p + 1.0 - m;
                Self {
                    regime,
                    m,
                    p,
                    r,
                    beta,
                    alpha0: beta / (p - 1.0),
                    eps_max: 1.0 / beta,
                    lambda,
                }
            }
            2 => {
                let beta = 0.5 * (r + 2.0 - m);
                let alpha0 = if r + m > 2.0 {
                    (r - m + 2.0) / (r + m - 2.0)
                } else {
                    (r + 2.0 - m) / (2.0 * (p - 1.0))
                };
                Self {
                    regime,
                    m,
                    p,
                    r,
                    beta,
                    alpha0,
                    eps_max: 2.0 / (r + 2.0 - m),
                    lambda,
                }
            }
            _ => {
                return Err(Error::invalid(format!(
                    "regime must be 1 or 2, got {regime}"
                )))
            }
        };
        Ok(sel)
    }

    /// Prefactor exponent `E` of `(t−s)^E`.
    pub fn exponent(&self, alpha: f64, k: f64) -> f64 {
        let (m, p, r) = (self.m, self.p, self.r);
        match self.regime {
            1 => 1.0 - alpha * m.max(p) * k / (p + 1.0 - m),
            _ => 1.0 - alpha * (2.0 * m).max(2.0 * p).max(r) * k / (r + 2.0 - m),
        }
    }

    pub fn check_parameters(&self, alpha: f64, eps: f64, k: f64, dim: usize) -> Result<()> {
        if !(alpha > self.alpha0) {
            return Err(Error::invalid(format!(
                "alpha > alpha0 violated (alpha = {alpha}, alpha0 = {})",
                self.alpha0
            )));
        }
        if !(eps > 0.0 && eps < self.eps_max) {
            return Err(Error::invalid(format!(
                "0 < eps < eps_max violated (eps = {eps}, eps_max = {})",
                self.eps_max
            )));
        }
        if !(k > dim as f64 + 2.0) {
            return Err(Error::invalid(format!(
                "k > d + 2 violated (k = {k}, d = {dim})"
            )));
        }
        Ok(())
    }
}

/// Regime 1 iff `p ≥ (m+r)/2`.
pub fn select_regime(m: f64, p: f64, r: f64) -> Result<RegimeSelection> {
    let regime = if p >= 0.5 * (m + r) { 1 } else { 2 };
    RegimeSelection::forced(m, p, r, regime)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRange {
    pub min: f64,
    pub max: f64,
}

/// `C_fit = max g(t,s,x,y)(t−s)^{−E}e^{ε(t−s)^α|y|_*^β}` over the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub c_fit: f64,
    pub log_c_fit: f64,
    pub exponent: f64,
    /// `[s, y…]` of the maximum.
    pub argmax: Vec<f64>,
    /// Range of `log g + ε(t−s)^α|y|_*^β − E log(t−s)` over nodes with `g > 0`.
    pub margins: MarginRange,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    pub regime: u8,
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub eps: f64,
    pub k: f64,
    pub exponent: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    #[serde(rename = "C_fit_refined")]
    pub c_fit_refined: f64,
    pub relative_change: f64,
    pub stable: bool,
    pub argmax: Vec<f64>,
    pub margins: MarginRange,
    pub pass: bool,
}

/// Rows `(s, y, margin)` of the pointwise log-margin over the window, for
/// nodes where `g > 0`.
pub fn bound_margins(
    slice: &KernelSlice,
    sel: &RegimeSelection,
    alpha: f64,
    eps: f64,
    k: f64,
    window: &TimeWindow,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    let grid = &slice.grid;
    let (k0, k1) = window.indices(grid)?;
    let e = sel.exponent(alpha, k);
    let power = SmoothPower::new(sel.beta)?;
    let radial: Vec<f64> = (0..grid.n_nodes())
        .map(|j| power.value(&grid.point(j)))
        .collect();
    let rows = par::map_range(k1 - k0 + 1, |i| {
        let n = k0 + i;
        let s = grid.time(n);
        let tau = slice.t - s;
        let shift = eps * tau.powf(alpha);
        let lt = tau.ln();
        slice
            .at(n)
            .iter()
            .enumerate()
            .filter(|(_, g)| **g > 0.0)
            .map(|(j, g)| (s, grid.point(j), g.ln() + shift * radial[j] - e * lt))
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

pub fn fit_constant(
    slice: &KernelSlice,
    sel: &RegimeSelection,
    alpha: f64,
    eps: f64,
    k: f64,
    window: &TimeWindow,
) -> Result<ConstantFit> {
    let rows = bound_margins(slice, sel, alpha, eps, k, window)?;
    if rows.is_empty() {
        return Err(Error::NonFinite {
            what: "C_fit".into(),
            detail: "the kernel underflows to zero on the whole window".into(),
        });
    }
    let (mut lo, mut hi, mut arg) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
    for (i, (_, _, m)) in rows.iter().enumerate() {
        if !m.is_finite() {
            return Err(Error::NonFinite {
                what: "bound margin".into(),
                detail: format!(
                    "{m} at s = {}, y = {:?} (truncation inadequate)",
                    rows[i].0, rows[i].1
                ),
            });
        }
        lo = lo.min(*m);
        if *m > hi {
            hi = *m;
            arg = i;
        }
    }
    let c_fit = hi.exp();
    if !c_fit.is_finite() {
        return Err(Error::NonFinite {
            what: "C_fit".into(),
            detail: format!("log C_fit = {hi}"),
        });
    }
    let mut argmax = vec![rows[arg].0];
    argmax.extend_from_slice(&rows[arg].1);
    Ok(ConstantFit {
        c_fit,
        log_c_fit: hi,
        exponent: sel.exponent(alpha, k),
        argmax,
        margins: MarginRange { min: lo, max: hi },
        n_points: rows.len(),
    })
}

/// Fits `C` on the slice and on a refined slice of the same problem; passes
/// iff both are finite and differ by at most 25%.
#[allow(clippy::too_many_arguments)]
pub fn verify_kernel_bound(
    slice: &KernelSlice,
    refined: &KernelSlice,
    sel: &RegimeSelection,
    alpha: f64,
    eps: f64,
    k: f64,
    window: &TimeWindow,
) -> Result<BoundVerdict> {
    sel.check_parameters(alpha, eps, k, slice.grid.dim)?;
    let (coarse, fine) = par::join(
        || fit_constant(slice, sel, alpha, eps, k, window),
        || fit_constant(refined, sel, alpha, eps, k, window),
    );
    let (coarse, fine) = (coarse?, fine?);
    let relative_change = (fine.c_fit - coarse.c_fit).abs() / coarse.c_fit;
    let stable = relative_change <= 0.25;
    Ok(BoundVerdict {
        regime: sel.regime,
        beta: sel.beta,
        lambda: sel.lambda,
        alpha,
        eps,
        k,
        exponent: coarse.exponent,
        c_fit: coarse.c_fit,
        c_fit_refined: fine.c_fit,
        relative_change,
        stable,
        argmax: coarse.argmax,
        margins: coarse.margins,
        pass: stable && coarse.c_fit > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub eps: f64,
    pub k: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub stable: bool,
}

impl From<&BoundVerdict> for SweepRow {
    fn from(v: &BoundVerdict) -> Self {
        Self {
            alpha: v.alpha,
            eps: v.eps,
            k: v.k,
            c_fit: v.c_fit,
            stable: v.stable,
        }
    }
}

/// CSV with header `alpha,eps,k,C_fit,stable`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,eps,k,C_fit,stable\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.10e},{}",
            r.alpha, r.eps, r.k, r.c_fit, r.stable
        );
    }
    out
}
