use serde::{Deserialize, Serialize};

use crate::solver::SpaceTimeGrid;
use crate::{Error, Result};

/// `0 < a₀ < a < b < b₀ < t ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub a0: f64,
    pub a: f64,
    pub b: f64,
    pub b0: f64,
    pub t: f64,
}

impl TimeWindow {
    pub fn new(a0: f64, a: f64, b: f64, b0: f64, t: f64) -> Result<Self> {
        let w = Self { a0, a, b, b0, t };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { a0, a, b, b0, t } = *self;
        if !(0.0 < a0 && a0 < a && a < b && b < b0 && b0 < t && t <= 1.0) {
            return Err(Error::invalid(format!(
                "time window needs 0 < a0 < a < b < b0 < t <= 1, got ({a0}, {a}, {b}, {b0}, {t})"
            )));
        }
        Ok(())
    }

    /// Grid indices nearest to `a₀` and `b₀`.
    pub fn indices(&self, grid: &SpaceTimeGrid) -> Result<(usize, usize)> {
        if (grid.t - self.t).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "window terminal time {} differs from the grid end {}",
                self.t, grid.t
            )));
        }
        if self.a0 < grid.s_min - 0.5 * grid.ds() {
            return Err(Error::invalid(format!(
                "window start {} lies before the first slice time {}",
                self.a0, grid.s_min
            )));
        }
        let (k0, k1) = (
            grid.nearest_time_index(self.a0),
            grid.nearest_time_index(self.b0),
        );
        if k1 <= k0 {
            return Err(Error::invalid("time window is narrower than one time step"));
        }
        Ok((k0, k1))
    }
}
