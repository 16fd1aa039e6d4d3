use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::assembly::{extend, restrict};
use super::grid::SpaceTimeGrid;
use super::slice::KernelSlice;
use super::stepper::Propagator;
use crate::lyapunov::StaticCertificate;
use crate::operator::{apply_operator, CoefficientField, OperatorVariant, TestFunction};
use crate::{par, Error, Result};

fn default_theta() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Mollifier width; `None` means `3·dx`.
    #[serde(default)]
    pub sigma_delta: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            sigma_delta: None,
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
        }
    }
}

impl SolverConfig {
    pub fn sigma(&self, grid: &SpaceTimeGrid) -> f64 {
        self.sigma_delta.unwrap_or(3.0 * grid.dx())
    }

    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "theta must lie in [1/2, 1], got {}",
                self.theta
            )));
        }
        let sigma = self.sigma(grid);
        if !(sigma >= 2.0 * grid.dx() * (1.0 - 1e-12)) {
            return Err(Error::invalid(format!(
                "mollifier width {sigma} is below 2 dx = {}",
                2.0 * grid.dx()
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("linear-solve tolerance must be positive"));
        }
        Ok(())
    }
}

/// Closed-form inversion of the tightness bound, without the clamp.
pub fn truncation_radius_unclamped(
    cert: &StaticCertificate,
    x: &[f64],
    m: f64,
    target_defect: f64,
) -> Result<f64> {
    if !(target_defect > 0.0 && target_defect < 1.0) {
        return Err(Error::invalid(format!(
            "target defect must lie in (0,1), got {target_defect}"
        )));
    }
    let lz = cert.log_value(x);
    // log(Z(x) + M) without overflowing Z.
    let log_num = lz + (m.max(0.0) * (-lz).exp()).ln_1p();
    let level = (log_num - target_defect.ln()) / cert.delta();
    Ok(level.max(0.0).powf(1.0 / cert.beta()))
}

/// Smallest `R ≥ max(2, |x|+1)` with `(Z(x)+M)/inf_{|y|≥R} Z ≤ target_defect`.
pub fn truncation_radius(
    cert: &StaticCertificate,
    x: &[f64],
    m: f64,
    target_defect: f64,
) -> Result<f64> {
    let raw = truncation_radius_unclamped(cert, x, m, target_defect)?;
    Ok(raw.max(truncation_floor(x)))
}

pub fn truncation_floor(x: &[f64]) -> f64 {
    (crate::operator::norm(x) + 1.0).max(2.0)
}

fn check_anchor(grid: &SpaceTimeGrid, t: f64, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: x.len(),
        });
    }
    if (grid.t - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "slice time t = {t} differs from grid end {}",
            grid.t
        )));
    }
    if x.iter().any(|c| c.abs() >= grid.radius) {
        return Err(Error::invalid(format!(
            "anchor {x:?} lies outside the box of radius {}",
            grid.radius
        )));
    }
    Ok(())
}

fn effective_theta(
    prop: &Propagator<'_>,
    cfg: &SolverConfig,
    warnings: &mut Vec<String>,
) -> (f64, f64) {
    let pe = prop.scan_peclet(9);
    if pe > 2.0 && cfg.theta < 1.0 {
        let msg = format!(
            "cell Peclet number {pe:.3} exceeds 2: advection under-resolved, falling back to theta = 1"
        );
        log::warn!("{msg}");
        warnings.push(msg);
        (1.0, pe)
    } else {
        (cfg.theta, pe)
    }
}

/// Normalized Gaussian of width `sigma` centered at `x`, on interior nodes.
fn mollified_delta(grid: &SpaceTimeGrid, x: &[f64], sigma: f64) -> Vec<f64> {
    let full: Vec<f64> = (0..grid.n_nodes())
        .map(|j| {
            if grid.is_boundary(j) {
                return 0.0;
            }
            let p = grid.point(j);
            let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = full.iter().sum::<f64>() * grid.cell();
    restrict(
        grid,
        &full.into_iter().map(|v| v / total).collect::<Vec<_>>(),
    )
}

/// Kernel slice `y ↦ g(t, s, x, y)` for every grid time `s`, by marching the
/// discrete adjoint backward from a mollified point mass at `x`.
pub fn solve_kernel_slice(
    field: &CoefficientField,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
) -> Result<KernelSlice> {
    cfg.validate(grid)?;
    check_anchor(grid, t, x)?;
    if field.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: field.dim(),
        });
    }
    let mut warnings = Vec::new();
    let probe = Propagator::new(
        field,
        grid,
        cfg.theta,
        cfg.tolerance,
        cfg.max_iterations,
        true,
    );
    let (theta, _) = effective_theta(&probe, cfg, &mut warnings);
    let prop = Propagator::new(field, grid, theta, cfg.tolerance, cfg.max_iterations, true);
    let sigma = cfg.sigma(grid);

    let steps = grid.steps;
    let mut values = Array2::zeros((steps + 1, grid.n_nodes()));
    let mut min_raw = f64::INFINITY;
    let mut store = |n: usize, v: &[f64], values: &mut Array2<f64>| -> Result<()> {
        let full = extend(grid, v);
        for (j, g) in full.into_iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: "kernel slice".into(),
                    detail: format!("time node {n}, node {j}"),
                });
            }
            min_raw = min_raw.min(g);
            values[[n, j]] = g.max(0.0);
        }
        Ok(())
    };
    let mut v = mollified_delta(grid, x, sigma);
    store(steps, &v, &mut values)?;
    for n in (0..steps).rev() {
        v = prop.backward_step(n, &v)?;
        store(n, &v, &mut values)?;
    }

    let cell = grid.cell();
    let masses: Vec<f64> = (0..=steps)
        .map(|n| values.row(n).iter().sum::<f64>() * cell)
        .collect();
    let diag = prop.diag.borrow();
    let defect = diag
        .potential_zero
        .then(|| masses.iter().map(|m| 1.0 - m).fold(0.0, f64::max));
    Ok(KernelSlice {
        t,
        x: x.to_vec(),
        grid: grid.clone(),
        values,
        sigma_delta: sigma,
        theta,
        scheme: format!(
            "adjoint theta-scheme (theta = {theta}), centered differences with upwinding above cell Peclet 1"
        ),
        defect,
        masses,
        min_raw: min_raw.min(0.0),
        max_peclet: diag.max_peclet,
        warnings,
    })
}

/// Kernel of the same operator with `V ≡ 0`.
pub fn solve_reference_kernel_g0(
    field: &CoefficientField,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
) -> Result<KernelSlice> {
    solve_kernel_slice(&field.without_potential(), t, x, cfg, grid)
}

/// Solves `g` and `g₀` concurrently.
pub fn solve_kernel_pair(
    field: &CoefficientField,
    t: f64,
    x: &[f64],
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
) -> Result<(KernelSlice, KernelSlice)> {
    let (g, g0) = par::join(
        || solve_kernel_slice(field, t, x, cfg, grid),
        || solve_reference_kernel_g0(field, t, x, cfg, grid),
    );
    Ok((g?, g0?))
}

/// Nodal values of `f` on the full grid (zero on the boundary).
pub fn sample_on_grid(grid: &SpaceTimeGrid, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
    par::map_range(grid.n_nodes(), |j| {
        if grid.is_boundary(j) {
            0.0
        } else {
            f(&grid.point(j))
        }
    })
}

/// Forward θ-scheme for `∂ₜu = 𝒜(t)u`, `u(s) = f`, on the grid's time nodes
/// from `s` to `t`. `f` and the result are full-grid nodal values.
pub fn solve_cauchy(
    field: &CoefficientField,
    f: &[f64],
    s: f64,
    t: f64,
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
) -> Result<Vec<f64>> {
    cfg.validate(grid)?;
    if f.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_nodes(),
            found: f.len(),
        });
    }
    if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "initial datum is not bounded ({bad})"
        )));
    }
    let k0 = grid
        .time_index(s)
        .ok_or_else(|| Error::invalid(format!("start time {s} is not a grid time")))?;
    let k1 = grid
        .time_index(t)
        .ok_or_else(|| Error::invalid(format!("end time {t} is not a grid time")))?;
    if k1 < k0 {
        return Err(Error::invalid("end time precedes start time"));
    }
    let mut warnings = Vec::new();
    let probe = Propagator::new(
        field,
        grid,
        cfg.theta,
        cfg.tolerance,
        cfg.max_iterations,
        false,
    );
    let (theta, _) = effective_theta(&probe, cfg, &mut warnings);
    let prop = Propagator::new(field, grid, theta, cfg.tolerance, cfg.max_iterations, false);
    let mut u = restrict(grid, f);
    for n in k0..k1 {
        u = prop.forward_step(n, &u)?;
    }
    Ok(extend(grid, &u))
}

/// `∫ f(y) g(t, s, x, y) dy` by the trapezoidal rule on the slice grid.
pub fn kernel_quadrature(slice: &KernelSlice, f: &[f64], s: f64) -> Result<f64> {
    let n = slice
        .grid
        .time_index(s)
        .ok_or_else(|| Error::invalid(format!("time {s} is not on the slice's time grid")))?;
    if f.len() != slice.grid.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: slice.grid.n_nodes(),
            found: f.len(),
        });
    }
    Ok(slice.integrate(n, f))
}

/// Relative residual of `G(t,s₁)f(x) − G(t,s₀)f(x) = −∫_{s₀}^{s₁} G(t,σ)𝒜(σ)f(x) dσ`
/// with both sides computed from one kernel slice. `s₀` and `s₁` are moved
/// to the nearest grid times.
#[allow(clippy::too_many_arguments)]
pub fn validate_evolution_identity(
    field: &CoefficientField,
    f: &dyn TestFunction,
    t: f64,
    s0: f64,
    s1: f64,
    x: &[f64],
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
) -> Result<f64> {
    let slice = solve_kernel_slice(field, t, x, cfg, grid)?;
    evolution_residual(&slice, field, f, s0, s1)
}

/// As [`validate_evolution_identity`] on an existing slice.
pub fn evolution_residual(
    slice: &KernelSlice,
    field: &CoefficientField,
    f: &dyn TestFunction,
    s0: f64,
    s1: f64,
) -> Result<f64> {
    let grid = &slice.grid;
    if f.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            found: f.dim(),
        });
    }
    let margin = 4.0 * slice.sigma_delta;
    match f.support() {
        Some((c, rho)) => {
            if c.iter().any(|ci| ci.abs() + rho + margin > grid.radius) {
                return Err(Error::SupportViolation(format!(
                    "support ball (center {c:?}, radius {rho}) plus margin {margin} leaves the box of radius {}",
                    grid.radius
                )));
            }
        }
        None => {
            return Err(Error::SupportViolation(
                "test function has no compact support".into(),
            ))
        }
    }
    if !(s0 < s1) {
        return Err(Error::invalid("validate_evolution_identity needs s0 < s1"));
    }
    let (k0, k1) = (grid.nearest_time_index(s0), grid.nearest_time_index(s1));
    if k1 <= k0 {
        return Err(Error::invalid("validate_evolution_identity needs s0 < s1"));
    }
    let fv = sample_on_grid(grid, |y| f.value(y));
    let lhs = slice.integrate(k1, &fv) - slice.integrate(k0, &fv);
    let autonomous = field.is_autonomous();
    let af_static = autonomous.then(|| {
        sample_on_grid(grid, |y| {
            apply_operator(field, f, grid.t, y, OperatorVariant::Full).unwrap_or(f64::NAN)
        })
    });
    let integrand: Vec<f64> = (k0..=k1)
        .map(|n| {
            let af = match &af_static {
                Some(a) => a.clone(),
                None => sample_on_grid(grid, |y| {
                    apply_operator(field, f, grid.time(n), y, OperatorVariant::Full)
                        .unwrap_or(f64::NAN)
                }),
            };
            slice.integrate(n, &af)
        })
        .collect();
    let ds = grid.ds();
    let integral: f64 = integrand.windows(2).map(|w| 0.5 * ds * (w[0] + w[1])).sum();
    let rhs = -integral;
    let res = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1e-12);
    if !res.is_finite() {
        return Err(Error::NonFinite {
            what: "evolution identity".into(),
            detail: format!("lhs {lhs}, rhs {rhs}"),
        });
    }
    Ok(res)
}
