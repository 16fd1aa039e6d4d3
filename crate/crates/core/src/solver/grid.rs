use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform box `[−R, R]^d` with `nodes` points per axis (boundary
/// included) and a uniform time grid on `[s_min, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub dim: usize,
    pub radius: f64,
    pub nodes: usize,
    pub s_min: f64,
    pub t: f64,
    pub steps: usize,
}

impl SpaceTimeGrid {
    pub fn new(
        dim: usize,
        radius: f64,
        nodes: usize,
        s_min: f64,
        t: f64,
        steps: usize,
    ) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::invalid(format!(
                "solver supports d = 1 or 2, got {dim}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "box radius must be positive, got {radius}"
            )));
        }
        if nodes < 5 {
            return Err(Error::invalid(
                "at least 3 interior nodes per axis are required",
            ));
        }
        if nodes.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "node count per axis must be odd so that R/dx is an integer, got {nodes}"
            )));
        }
        if !(t > s_min) || steps < 2 {
            return Err(Error::invalid(
                "time window needs t > s_min and at least 2 steps",
            ));
        }
        Ok(Self {
            dim,
            radius,
            nodes,
            s_min,
            t,
            steps,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.radius / (self.nodes - 1) as f64
    }

    pub fn ds(&self) -> f64 {
        (self.t - self.s_min) / self.steps as f64
    }

    /// Cell volume `dx^d`.
    pub fn cell(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.coord(i)).collect()
    }

    pub fn coord(&self, i: usize) -> f64 {
        if 2 * i + 1 == self.nodes {
            0.0
        } else {
            -self.radius + i as f64 * self.dx()
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    /// Axis indices of a flattened node (first axis slowest).
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        match self.dim {
            1 => vec![flat],
            _ => vec![flat / self.nodes, flat % self.nodes],
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.nodes + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .map(|i| self.coord(i))
            .collect()
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .any(|&i| i == 0 || i + 1 == self.nodes)
    }

    /// Time of step `n`, with the last step exactly `t`.
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t
        } else {
            self.s_min + n as f64 * self.ds()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// Index of the time node closest to `s`, if within `1e−9·ds`.
    pub fn time_index(&self, s: f64) -> Option<usize> {
        let k = ((s - self.s_min) / self.ds()).round();
        if k < 0.0 || k > self.steps as f64 {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - s).abs() <= 1e-9 * self.ds().max(1e-300)).then_some(k)
    }

    pub fn nearest_time_index(&self, s: f64) -> usize {
        ((s - self.s_min) / self.ds())
            .round()
            .clamp(0.0, self.steps as f64) as usize
    }

    /// Same box and window with `factor` times finer spacing in space and time.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.dim,
            self.radius,
            (self.nodes - 1) * factor + 1,
            self.s_min,
            self.t,
            self.steps * factor,
        )
    }
}
