use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{select_regime, RegimeSelection, TimeWindow, WeightSystem};
use crate::lyapunov::LyapunovCase;
use crate::operator::{CoefficientField, CustomCoefficients};
use crate::solver::{SolverConfig, SpaceTimeGrid};
use crate::{Error, Result};

/// Operator family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `(1+|x|_*^m)Δ − |x|_*^{p−1}x·∇ − |x|_*^r`.
    Example { m: f64, p: f64, r: f64, dim: usize },
    /// `qΔ − c`.
    Constant {
        dim: usize,
        diffusion: f64,
        potential: f64,
    },
    /// Expression-defined coefficients; `exponents = [m, p, r]` enables the
    /// bound stage.
    Custom {
        dim: usize,
        diffusion: Vec<String>,
        drift: Vec<String>,
        potential: String,
        eta: f64,
        #[serde(default)]
        exponents: Option<[f64; 3]>,
    },
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Example { dim, .. } | Self::Constant { dim, .. } | Self::Custom { dim, .. } => {
                *dim
            }
        }
    }

    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            Self::Example { m, p, r, dim } => CoefficientField::example(*m, *p, *r, *dim),
            Self::Constant {
                dim,
                diffusion,
                potential,
            } => CoefficientField::constant(*dim, *diffusion, *potential),
            Self::Custom {
                dim,
                diffusion,
                drift,
                potential,
                eta,
                ..
            } => CoefficientField::new(
                CustomCoefficients::parse(*dim, diffusion, drift, potential)?,
                *eta,
            ),
        }
    }

    /// Growth exponents `(m, p, r)`, when known.
    pub fn exponents(&self) -> Option<(f64, f64, f64)> {
        match self {
            Self::Example { m, p, r, .. } => Some((*m, *p, *r)),
            Self::Custom {
                exponents: Some([m, p, r]),
                ..
            } => Some((*m, *p, *r)),
            _ => None,
        }
    }
}

/// `Z = exp(δ|x|_*^β)` and the grid on which `M` is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    pub delta: f64,
    /// Defaults to the regime's `β`.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Fixed `M`; estimated on the grid when absent.
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default = "default_m_radius")]
    pub m_radius: f64,
    #[serde(default = "default_m_nodes")]
    pub m_nodes: usize,
}

/// Time-dependent function `W = exp(ε(t−s)^α|x|_*^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WSpec {
    pub eps: f64,
    pub alpha: f64,
    /// Defaults to the case matching the regime.
    #[serde(default)]
    pub case: Option<LyapunovCase>,
}

/// Tensor grid for the time-dependent checks plus 10³ seeded random points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckGrid {
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_n_s")]
    pub n_s: usize,
    #[serde(default = "default_check_radius")]
    pub radius: f64,
    #[serde(default = "default_n_x")]
    pub n_x: usize,
}

impl Default for CheckGrid {
    fn default() -> Self {
        Self {
            s_max: default_s_max(),
            n_s: default_n_s(),
            radius: default_check_radius(),
            n_x: default_n_x(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    /// Box radius; derived from the certificate and `target_defect` when absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_target_defect")]
    pub target_defect: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(flatten)]
    pub scheme: SolverConfig,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            radius: None,
            target_defect: default_target_defect(),
            nodes: default_nodes(),
            steps: default_steps(),
            scheme: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub eps: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    /// Defaults to `d + 3`.
    #[serde(default)]
    pub k: Option<f64>,
    pub alpha: f64,
    pub eps: f64,
    /// Forces the regime formulas instead of selecting them from `(m, p, r)`.
    #[serde(default)]
    pub regime: Option<u8>,
    /// `ε₀ < ε₁ < ε₂` of the weight system.
    pub weights: [f64; 3],
    #[serde(default)]
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSpec {
    /// Levels `n = e^x` for each listed `x`.
    pub log_levels: Vec<f64>,
    /// `W₁ = exp(ε₁(t−s)^α|x|_*^β)` defining the truncation.
    pub eps1: f64,
    pub alpha: f64,
    /// Defaults to the certificate's `β`.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

impl ApproxSpec {
    pub fn levels(&self) -> Vec<f64> {
        self.log_levels.iter().map(|l| l.exp()).collect()
    }
}

/// A full experiment: one operator, one anchor `(t, x)`, and the settings of
/// every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub operator: OperatorSpec,
    /// Anchor point `x`; the origin when absent.
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    pub certificate: CertificateSpec,
    #[serde(default)]
    pub lyapunov: Vec<WSpec>,
    #[serde(default)]
    pub check_grid: CheckGrid,
    #[serde(default)]
    pub solver: SolverSpec,
    pub window: TimeWindow,
    #[serde(default)]
    pub bound: Option<BoundSpec>,
    #[serde(default)]
    pub approximation: Option<ApproxSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Grid refinement factor of the stability checks.
    #[serde(default = "default_refine")]
    pub refine: usize,
}

fn default_m_radius() -> f64 {
    6.0
}
fn default_m_nodes() -> usize {
    1201
}
fn default_s_max() -> f64 {
    0.9
}
fn default_n_s() -> usize {
    64
}
fn default_check_radius() -> f64 {
    4.0
}
fn default_n_x() -> usize {
    129
}
fn default_target_defect() -> f64 {
    1e-6
}
fn default_nodes() -> usize {
    513
}
fn default_steps() -> usize {
    512
}
fn default_mu() -> f64 {
    0.05
}
fn default_refine() -> usize {
    2
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn anchor_x(&self) -> Vec<f64> {
        self.anchor.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.name))
    }

    /// Regime from the override or from `(m, p, r)`.
    pub fn regime(&self) -> Option<Result<RegimeSelection>> {
        let (m, p, r) = self.operator.exponents()?;
        Some(match self.bound.as_ref().and_then(|b| b.regime) {
            Some(forced) => RegimeSelection::forced(m, p, r, forced),
            None => select_regime(m, p, r),
        })
    }

    /// `β` of the certificate: explicit, or the natural regime's `β`.
    pub fn certificate_beta(&self) -> Result<f64> {
        if let Some(b) = self.certificate.beta {
            return Ok(b);
        }
        let (m, p, r) = self.operator.exponents().ok_or_else(|| {
            Error::invalid("certificate.beta is required for operators without exponents")
        })?;
        Ok(select_regime(m, p, r)?.beta)
    }

    /// Lyapunov case for a `W` spec: explicit, or matching the natural regime.
    pub fn w_case(&self, w: &WSpec) -> Result<LyapunovCase> {
        if let Some(c) = w.case {
            return Ok(c);
        }
        let (m, p, r) = self
            .operator
            .exponents()
            .ok_or_else(|| Error::invalid("time-dependent functions need operator exponents"))?;
        Ok(match select_regime(m, p, r)?.regime {
            1 => LyapunovCase::I,
            _ => LyapunovCase::II,
        })
    }

    pub fn bound_k(&self) -> f64 {
        self.bound
            .as_ref()
            .and_then(|b| b.k)
            .unwrap_or(self.dim() as f64 + 3.0)
    }

    /// Structural checks of every stage's parameters. Certificate-level
    /// inequalities such as `δβ < 1` are verified by the certify stage.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("experiment name must not be empty"));
        }
        let field = self.operator.build()?;
        let dim = field.dim();
        if let Some((m, p, r)) = self.operator.exponents() {
            select_regime(m, p, r)?;
        }
        let x = self.anchor_x();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        self.window.validate()?;
        let c = &self.certificate;
        if !(c.delta > 0.0) {
            return Err(Error::invalid(format!(
                "certificate delta must be positive, got {}",
                c.delta
            )));
        }
        let beta = self.certificate_beta()?;
        if !(beta > 0.0) {
            return Err(Error::invalid(format!(
                "certificate beta must be positive, got {beta}"
            )));
        }
        if let Some(m) = c.bound {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!(
                    "certificate bound M must be finite and >= 0, got {m}"
                )));
            }
        }
        if !(c.m_radius > 0.0 && c.m_nodes >= 3) {
            return Err(Error::invalid(
                "certificate grid needs m_radius > 0 and m_nodes >= 3",
            ));
        }
        for w in &self.lyapunov {
            if !(w.eps > 0.0 && w.alpha > 0.0) {
                return Err(Error::invalid(format!(
                    "W needs eps > 0 and alpha > 0, got eps = {}, alpha = {}",
                    w.eps, w.alpha
                )));
            }
            if !(w.eps < c.delta) {
                return Err(Error::invalid(format!(
                    "eps < delta violated (eps = {}, delta = {})",
                    w.eps, c.delta
                )));
            }
            self.w_case(w)?;
        }
        let g = &self.check_grid;
        if !(g.s_max < self.window.t && g.s_max > 0.0 && g.n_s >= 2 && g.n_x >= 2 && g.radius > 0.0)
        {
            return Err(Error::invalid(
                "check grid needs 0 < s_max < t, n_s >= 2, n_x >= 2 and radius > 0",
            ));
        }
        let s = &self.solver;
        if !(s.target_defect > 0.0 && s.target_defect < 1.0) {
            return Err(Error::invalid(format!(
                "target defect must lie in (0,1), got {}",
                s.target_defect
            )));
        }
        let probe_radius = s.radius.unwrap_or(8.0);
        let grid = SpaceTimeGrid::new(dim, probe_radius, s.nodes, 0.0, self.window.t, s.steps)?;
        s.scheme.validate(&grid)?;
        if self.refine < 2 {
            return Err(Error::invalid(format!(
                "refinement factor must be >= 2, got {}",
                self.refine
            )));
        }
        if let Some(b) = &self.bound {
            if self.operator.exponents().is_none() {
                return Err(Error::invalid(
                    "the bound stage needs operator exponents (m, p, r)",
                ));
            }
            let sel = self.regime().expect("exponents checked")?;
            let k = self.bound_k();
            sel.check_parameters(b.alpha, b.eps, k, dim)?;
            WeightSystem::new(dim, k, b.weights, c.delta, b.alpha, sel.beta, self.window)?;
            for pt in &b.sweep {
                sel.check_parameters(pt.alpha, pt.eps, pt.k, dim)?;
            }
        }
        if let Some(a) = &self.approximation {
            if a.log_levels.is_empty() || a.log_levels.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(
                    "approximation levels must be a nonempty increasing sequence",
                ));
            }
            if a.log_levels[0] < 0.0 {
                return Err(Error::invalid("approximation levels need n >= 1"));
            }
            if !(a.eps1 > 0.0 && a.alpha > 0.0) {
                return Err(Error::invalid(
                    "approximation W1 needs eps1 > 0 and alpha > 0",
                ));
            }
            if !(a.mu > 0.0 && a.mu < 0.2) {
                return Err(Error::invalid(format!(
                    "mollification width must lie in (0, 0.2), got {}",
                    a.mu
                )));
            }
        }
        Ok(())
    }
}
