use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cutoff::CutoffProfile;
use super::truncated::build_truncated_operator;
use crate::bounds::TimeWindow;
use crate::lyapunov::TimeDependentLyapunov;
use crate::operator::{norm, CoefficientField};
use crate::solver::{solve_kernel_slice, KernelSlice, SolverConfig, SpaceTimeGrid};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub n: f64,
    /// `sup_K |gₙ − g|` over the sweep window.
    pub sup_diff: f64,
    /// `sup_diff / sup_K g`.
    pub relative_diff: f64,
    /// `max |massₙ(s) − mass(s)|` over the sweep window.
    pub mass_defect: f64,
    pub bitwise_equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSweep {
    pub compact_radius: f64,
    pub s_range: (f64, f64),
    pub sup_reference: f64,
    pub levels: Vec<SweepLevel>,
    pub strictly_decreasing: bool,
}

impl ConvergenceSweep {
    /// CSV `n,sup_diff,mass_defect`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,sup_diff,mass_defect\n");
        for l in &self.levels {
            let _ = writeln!(out, "{},{:.10e},{:.10e}", l.n, l.sup_diff, l.mass_defect);
        }
        out
    }
}

/// Solves the kernel slice of `𝒜` and of each `𝒜ₙ` on one grid and reports
/// `sup |gₙ − g|` over `K = B(0, R/2)` and `s ∈ [a₀ + 0.1(t−a₀), b₀]`.
/// `{W₁ ≤ n₁}` must contain `K` over that window.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    field: &CoefficientField,
    levels: &[f64],
    w1: &TimeDependentLyapunov,
    profile: Arc<CutoffProfile>,
    cfg: &SolverConfig,
    grid: &SpaceTimeGrid,
    x: &[f64],
    window: &TimeWindow,
) -> Result<ConvergenceSweep> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "truncation levels must be a nonempty increasing sequence",
        ));
    }
    let s_lo = window.a0 + 0.1 * (window.t - window.a0);
    let (k0, k1) = (
        grid.nearest_time_index(s_lo),
        grid.nearest_time_index(window.b0),
    );
    let radius = 0.5 * grid.radius;
    let in_k: Vec<usize> = (0..grid.n_nodes())
        .filter(|&j| norm(&grid.point(j)) <= radius)
        .collect();
    let worst = (k0..=k1)
        .flat_map(|n| in_k.iter().map(move |&j| (n, j)))
        .map(|(n, j)| w1.log_value(grid.time(n), &grid.point(j)))
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > levels[0].ln() {
        return Err(Error::invalid(format!(
            "the sublevel set {{W1 <= {}}} does not contain K = B(0, {radius}): max log W1 on K is {worst}",
            levels[0]
        )));
    }
    let ops = levels
        .iter()
        .map(|&n| build_truncated_operator(field, n, w1, profile.clone()))
        .collect::<Result<Vec<_>>>()?;
    let (base, solved) = par::join(
        || solve_kernel_slice(field, window.t, x, cfg, grid),
        || {
            par::map_collect(&ops, |op| {
                solve_kernel_slice(op.field(), window.t, x, cfg, grid)
            })
        },
    );
    let base = base?;
    let solved = solved.into_iter().collect::<Result<Vec<KernelSlice>>>()?;
    let sup_reference = (k0..=k1)
        .flat_map(|n| in_k.iter().map(move |&j| (n, j)))
        .map(|(n, j)| base.values[[n, j]])
        .fold(0.0, f64::max);
    let rows: Vec<SweepLevel> = levels
        .iter()
        .zip(&solved)
        .map(|(&n, g)| {
            let sup_diff = (k0..=k1)
                .flat_map(|i| in_k.iter().map(move |&j| (i, j)))
                .map(|(i, j)| (g.values[[i, j]] - base.values[[i, j]]).abs())
                .fold(0.0, f64::max);
            let mass_defect = (k0..=k1)
                .map(|i| (g.masses[i] - base.masses[i]).abs())
                .fold(0.0, f64::max);
            SweepLevel {
                n,
                sup_diff,
                relative_diff: sup_diff / sup_reference,
                mass_defect,
                bitwise_equal: g.values == base.values,
            }
        })
        .collect();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].sup_diff < w[0].sup_diff);
    Ok(ConvergenceSweep {
        compact_radius: radius,
        s_range: (grid.time(k0), grid.time(k1)),
        sup_reference,
        levels: rows,
        strictly_decreasing,
    })
}
