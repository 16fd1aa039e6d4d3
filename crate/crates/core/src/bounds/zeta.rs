use serde::{Deserialize, Serialize};

use super::window::TimeWindow;
use crate::lyapunov::{StaticCertificate, TimeDependentLyapunov};
use crate::operator::CoefficientField;
use crate::solver::{sample_on_grid, KernelSlice};
use crate::{par, Error, Result};

/// `s ↦ ζ_W(s,x) = ∫W(s,y)g(t,s,x,y)dy` on the slice's time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaProfile {
    pub t: f64,
    pub x: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub window: TimeWindow,
    /// `sup` and trapezoidal integral over the grid times in `[a₀, b₀]`.
    pub sup_window: f64,
    pub integral_window: f64,
}

/// Ratio check of `ζ_W(s,x) ≤ e^{∫ₛᵗh}W(t,x)` and monotonicity of `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    pub pass: bool,
    pub tolerance: f64,
    pub max_ratio: f64,
    pub argmax_s: f64,
    pub ratios: Vec<f64>,
    pub phi: Vec<f64>,
    /// Smallest relative increment `(Φ(τₙ₊₁) − Φ(τₙ))/max(1, Φ(τₙ))`.
    pub phi_min_increment: f64,
    pub phi_monotone: bool,
}

/// Check of `∫Z(y)g(t,s,x,y)dy ≤ Z(x) + M(t−s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassBoundReport {
    pub pass: bool,
    pub tolerance: f64,
    pub bound_m: f64,
    pub max_ratio: f64,
    pub argmax_s: f64,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// `Γ₁(k/2) = (∫∫|F|^{k/2}g)^{2/k}` and `Γ₂(k/2) = (∫∫V^{k/2}g)^{2/k}` over
/// `(a₀, b₀) ×` box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMoments {
    pub k: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

fn trapezoid(ds: f64, values: &[f64]) -> f64 {
    values.windows(2).map(|w| 0.5 * ds * (w[0] + w[1])).sum()
}

fn overflow(what: &str, s: f64, v: f64) -> Error {
    Error::NonFinite {
        what: what.into(),
        detail: format!(
            "value {v} at s = {s}: the weight outgrows the kernel decay in the box (truncation inadequate)"
        ),
    }
}

/// `∫ exp(logw(y)) g(s,y) dy` with the exponential taken after a shift, so
/// that large weights on nodes where `g` vanishes do not overflow.
fn weighted_integral(slice: &KernelSlice, n: usize, logw: &[f64]) -> f64 {
    let row = slice.at(n);
    let cell = slice.grid.cell();
    let mut acc = 0.0;
    for (j, &g) in row.iter().enumerate() {
        if g > 0.0 {
            acc += (logw[j] + g.ln()).exp();
        }
    }
    acc * cell
}

pub fn compute_zeta(
    slice: &KernelSlice,
    w: &TimeDependentLyapunov,
    window: &TimeWindow,
) -> Result<ZetaProfile> {
    let grid = &slice.grid;
    if w.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: w.dim(),
        });
    }
    if (w.t() - slice.t).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "W terminal time {} differs from the slice time {}",
            w.t(),
            slice.t
        )));
    }
    let (k0, k1) = window.indices(grid)?;
    let times = grid.times();
    let values = par::map_range(times.len(), |n| {
        let s = times[n];
        let logw = sample_on_grid(grid, |y| w.log_value(s, y));
        weighted_integral(slice, n, &logw)
    });
    if let Some((n, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(overflow("zeta_W", times[n], *v));
    }
    let sup_window = values[k0..=k1].iter().cloned().fold(0.0, f64::max);
    let integral_window = trapezoid(grid.ds(), &values[k0..=k1]);
    Ok(ZetaProfile {
        t: slice.t,
        x: slice.x.clone(),
        eps: w.eps(),
        alpha: w.alpha(),
        beta: w.beta(),
        times,
        values,
        window: *window,
        sup_window,
        integral_window,
    })
}

/// Ratios `ζ_W(s,x)/(e^{∫ₛᵗh}W(t,x))` at every grid time (pass iff all are
/// `≤ 1 + tolerance`) and `Φ(τ) = (ζ_W(t,x) + ∫_τ^t hζ_W)e^{∫_{s₀}^τ h}` on the
/// grid, anchored at the first grid time `s₀`. The `hζ_W` integral weights
/// the trapezoid by the exact integral of `h` per step, which stays finite
/// when `h` is singular at `t`.
pub fn check_zeta_bound(
    profile: &ZetaProfile,
    w: &TimeDependentLyapunov,
    tolerance: f64,
) -> ZetaReport {
    let h = w.rate();
    let times = &profile.times;
    let zeta = &profile.values;
    let n = times.len();
    let wt = w.value(profile.t, &profile.x);
    let ratios: Vec<f64> = times
        .iter()
        .zip(zeta)
        .map(|(&s, &z)| z / (h.integral_to_t(s).exp() * wt))
        .collect();
    let (mut max_ratio, mut argmax_s) = (f64::NEG_INFINITY, times[0]);
    for (&s, &r) in times.iter().zip(&ratios) {
        if r > max_ratio {
            max_ratio = r;
            argmax_s = s;
        }
    }
    // tail[j] = ∫_{τ_j}^t hζ.
    let mut tail = vec![0.0; n];
    for j in (0..n - 1).rev() {
        tail[j] = tail[j + 1] + h.integral(times[j], times[j + 1]) * 0.5 * (zeta[j] + zeta[j + 1]);
    }
    let s0 = times[0];
    let phi: Vec<f64> = (0..n)
        .map(|j| (zeta[n - 1] + tail[j]) * h.integral(s0, times[j]).exp())
        .collect();
    let phi_min_increment = phi
        .windows(2)
        .map(|p| (p[1] - p[0]) / p[0].abs().max(1.0))
        .fold(f64::INFINITY, f64::min);
    let phi_monotone = phi_min_increment >= -1e-6;
    ZetaReport {
        pass: max_ratio <= 1.0 + tolerance && max_ratio.is_finite() && phi_monotone,
        tolerance,
        max_ratio,
        argmax_s,
        ratios,
        phi,
        phi_min_increment,
        phi_monotone,
    }
}

/// Requires a certificate with a bound `M` attached.
pub fn check_mass_bound(
    slice: &KernelSlice,
    cert: &StaticCertificate,
    tolerance: f64,
) -> Result<MassBoundReport> {
    let m = cert
        .bound()
        .ok_or_else(|| Error::invalid("mass bound check needs a certificate with M attached"))?;
    let grid = &slice.grid;
    let logz = sample_on_grid(grid, |y| cert.log_value(y));
    let times = grid.times();
    let lhs = par::map_range(times.len(), |n| weighted_integral(slice, n, &logz));
    if let Some((n, v)) = lhs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(overflow("G(t,s)Z", times[n], *v));
    }
    let zx = cert.value(&slice.x);
    let rhs: Vec<f64> = times.iter().map(|s| zx + m * (slice.t - s)).collect();
    let (mut max_ratio, mut argmax_s) = (f64::NEG_INFINITY, times[0]);
    for ((&s, l), r) in times.iter().zip(&lhs).zip(&rhs) {
        let q = l / r;
        if q > max_ratio {
            max_ratio = q;
            argmax_s = s;
        }
    }
    Ok(MassBoundReport {
        pass: max_ratio <= 1.0 + tolerance,
        tolerance,
        bound_m: m,
        max_ratio,
        argmax_s,
        times,
        lhs,
        rhs,
    })
}

/// Trapezoidal space-time quadrature over the grid times in `[a₀, b₀]`.
pub fn compute_gamma_moments(
    slice: &KernelSlice,
    field: &CoefficientField,
    k: f64,
    window: &TimeWindow,
) -> Result<GammaMoments> {
    let grid = &slice.grid;
    if field.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: field.dim(),
        });
    }
    if !(k > 2.0) {
        return Err(Error::invalid(format!("moments need k > 2, got {k}")));
    }
    let (k0, k1) = window.indices(grid)?;
    let h = 0.5 * k;
    let autonomous = field.is_autonomous();
    let sample = |s: f64| {
        (
            sample_on_grid(grid, |y| field.drift(s, y).norm().powf(h)),
            sample_on_grid(grid, |y| field.potential(s, y).max(0.0).powf(h)),
        )
    };
    let fixed = autonomous.then(|| sample(grid.t));
    let rows: Vec<(f64, f64)> = (k0..=k1)
        .map(|n| {
            let owned;
            let (f, v) = match &fixed {
                Some(fv) => fv,
                None => {
                    owned = sample(grid.time(n));
                    &owned
                }
            };
            (slice.integrate(n, f), slice.integrate(n, v))
        })
        .collect();
    let ds = grid.ds();
    let i1 = trapezoid(ds, &rows.iter().map(|r| r.0).collect::<Vec<_>>());
    let i2 = trapezoid(ds, &rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let (gamma1, gamma2) = (i1.powf(1.0 / h), i2.powf(1.0 / h));
    if !(gamma1.is_finite() && gamma2.is_finite()) {
        return Err(Error::NonFinite {
            what: "Gamma moments".into(),
            detail: format!(
                "integrals {i1}, {i2}: truncation too small for the growth of |F|^(k/2) and V^(k/2)"
            ),
        });
    }
    Ok(GammaMoments { k, gamma1, gamma2 })
}
