use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::grid::SpaceTimeGrid;
use crate::{Error, Result};

/// Discrete kernel slice `g(t, s, x, y)` for all grid times `s` and nodes `y`.
///
/// `values[[n, j]]` is the value at time node `n` (increasing, last is `t`)
/// and flattened node `j`, clamped at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub t: f64,
    pub x: Vec<f64>,
    pub grid: SpaceTimeGrid,
    pub values: Array2<f64>,
    pub sigma_delta: f64,
    pub theta: f64,
    pub scheme: String,
    /// `max_s (1 − mass(s))` when `V` vanishes on the grid.
    pub defect: Option<f64>,
    pub masses: Vec<f64>,
    /// Most negative value before clamping.
    pub min_raw: f64,
    pub max_peclet: f64,
    pub warnings: Vec<String>,
}

/// JSON sidecar of a slice CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSidecar {
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub dx: f64,
    pub ds: f64,
    pub sigma_delta: f64,
    pub theta: f64,
    pub defect: Option<f64>,
    pub dim: usize,
    pub nodes: usize,
    pub steps: usize,
    pub s_min: f64,
    /// Only every `time_stride`-th time node is written to the CSV.
    pub time_stride: usize,
    pub scheme: String,
    pub min_raw: f64,
    pub max_peclet: f64,
}

impl KernelSlice {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn at(&self, n: usize) -> ArrayView1<'_, f64> {
        self.values.row(n)
    }

    pub fn mass(&self, n: usize) -> f64 {
        self.at(n).iter().sum::<f64>() * self.grid.cell()
    }

    /// `Σ_y f(y) g(s_n, y) dy` by the trapezoidal rule (boundary values are 0).
    pub fn integrate(&self, n: usize, f: &[f64]) -> f64 {
        self.at(n).iter().zip(f).map(|(g, fi)| g * fi).sum::<f64>() * self.grid.cell()
    }

    pub fn sidecar(&self, time_stride: usize) -> SliceSidecar {
        SliceSidecar {
            t: self.t,
            x: self.x.clone(),
            radius: self.grid.radius,
            dx: self.grid.dx(),
            ds: self.grid.ds(),
            sigma_delta: self.sigma_delta,
            theta: self.theta,
            defect: self.defect,
            dim: self.grid.dim,
            nodes: self.grid.nodes,
            steps: self.grid.steps,
            s_min: self.grid.s_min,
            time_stride,
            scheme: self.scheme.clone(),
            min_raw: self.min_raw,
            max_peclet: self.max_peclet,
        }
    }

    /// Writes `s,y1[,y2],g` rows for every `time_stride`-th time node (the
    /// terminal node always included) and the JSON sidecar next to it.
    pub fn write(&self, csv: &Path, sidecar: &Path, time_stride: usize) -> Result<()> {
        let stride = time_stride.max(1);
        let file = fs::File::create(csv).map_err(|e| Error::io(csv, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(csv, e);
        let header = match self.grid.dim {
            1 => "s,y1,g",
            _ => "s,y1,y2,g",
        };
        writeln!(w, "{header}").map_err(io)?;
        let points: Vec<Vec<f64>> = (0..self.grid.n_nodes())
            .map(|j| self.grid.point(j))
            .collect();
        for n in (0..=self.grid.steps).filter(|n| n % stride == 0 || *n == self.grid.steps) {
            let s = self.grid.time(n);
            for (j, p) in points.iter().enumerate() {
                write!(w, "{s:.16e}").map_err(io)?;
                for c in p {
                    write!(w, ",{c:.16e}").map_err(io)?;
                }
                writeln!(w, ",{:.16e}", self.values[[n, j]]).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
        let json = serde_json::to_string_pretty(&self.sidecar(stride))?;
        fs::write(sidecar, json).map_err(|e| Error::io(sidecar, e))
    }

    /// Reads back rows written by [`Self::write`]; time nodes not in the CSV
    /// stay zero. Masses are recomputed from the stored values.
    pub fn read(csv: &Path, sidecar: &Path) -> Result<Self> {
        let text = fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
        let meta: SliceSidecar = serde_json::from_str(&text)?;
        let grid = SpaceTimeGrid::new(
            meta.dim,
            meta.radius,
            meta.nodes,
            meta.s_min,
            meta.t,
            meta.steps,
        )?;
        let mut values = Array2::zeros((grid.steps + 1, grid.n_nodes()));
        let file = fs::File::open(csv).map_err(|e| Error::io(csv, e))?;
        let mut lines = BufReader::new(file).lines();
        lines.next();
        let mut row_in_block = 0usize;
        for line in lines {
            let line = line.map_err(|e| Error::io(csv, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("bad slice row '{line}': {e}")))?;
            if cols.len() != grid.dim + 2 {
                return Err(Error::invalid(format!(
                    "slice row has {} columns",
                    cols.len()
                )));
            }
            let n = grid
                .time_index(cols[0])
                .ok_or_else(|| Error::invalid(format!("time {} not on the slice grid", cols[0])))?;
            values[[n, row_in_block % grid.n_nodes()]] = cols[grid.dim + 1];
            row_in_block += 1;
        }
        let cell = grid.cell();
        let masses = (0..=grid.steps)
            .map(|n| values.row(n).iter().sum::<f64>() * cell)
            .collect();
        Ok(Self {
            t: meta.t,
            x: meta.x,
            grid,
            values,
            sigma_delta: meta.sigma_delta,
            theta: meta.theta,
            scheme: meta.scheme,
            defect: meta.defect,
            masses,
            min_raw: meta.min_raw,
            max_peclet: meta.max_peclet,
            warnings: Vec::new(),
        })
    }
}
