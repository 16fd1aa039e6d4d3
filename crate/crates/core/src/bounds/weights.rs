use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::window::TimeWindow;
use crate::lyapunov::SampleSet;
use crate::operator::{CoefficientField, SmoothPower};
use crate::{par, Error, Result};

/// Names of the nine constants, in order.
const NAMES: [&str; 9] = [
    "c1: w <= c1 w^((k-2)/k) W1^(2/k)",
    "c2: |Q grad w| <= c2 w^((k-1)/k) W1^(1/k)",
    "c3: |Tr(Q D2 w)| <= c3 w^((k-2)/k) W1^(2/k)",
    "c4: |ds w| <= c4 w^((k-2)/k) W1^(2/k)",
    "c5: |div Q| <= c5 w^(-1/k) W2^(1/k)",
    "c6: |F| <= c6 w^(-1/k) W2^(1/k)",
    "c7: V^(1/2) <= c7 w^(-1/k) W2^(1/k)",
    "c8: |Laplace w| <= c8 w^((k-2)/k) W1^(2/k)",
    "c9: |Q grad W1| <= c9 w^(-1/k) W1 W2^(1/k)",
];

/// `γ₂…γ₉` for the example family:
/// `(α(m−1)₊/β, α(m−2)₊/β, 1, αm/β, αp/β, αr/(2β), 0, 0)`.
pub fn gamma_exponents(m: f64, p: f64, r: f64, alpha: f64, beta: f64) -> [f64; 8] {
    [
        alpha * (m - 1.0).max(0.0) / beta,
        alpha * (m - 2.0).max(0.0) / beta,
        1.0,
        alpha * m / beta,
        alpha * p / beta,
        alpha * r / (2.0 * beta),
        0.0,
        0.0,
    ]
}

/// The triple `w = e^{ε₀(t−s)^α|y|_*^β}`, `W_j = e^{ε_j(t−s)^α|y|_*^β}` with
/// the constants `c₁…c₉` and the pair `(c₀, σ)` for `W₂ ≤ c₀Z^{1−σ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSystem {
    pub dim: usize,
    pub k: f64,
    pub eps: [f64; 3],
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub window: TimeWindow,
    /// `γ₂…γ₉`.
    pub gammas: [f64; 8],
    /// `c̄₁…c̄₉`.
    pub c_bar: [f64; 9],
    /// `c₁…c₉`.
    pub constants: [f64; 9],
    pub c0: f64,
    pub sigma: f64,
}

/// Outcome of the constant computation on a verification grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub n_samples: usize,
    pub radius: f64,
    /// Largest `ratioᵢ·(t−s)^{γᵢ}` and where it is attained, `[s, y…]`.
    pub sup: [f64; 9],
    pub argmax: Vec<Vec<f64>>,
    /// `min (cᵢ − ratioᵢ)` over the grid; nonnegative by construction.
    pub min_margin: [f64; 9],
    /// `max |w^{−2}∂ₛw|` and `max |w^{−2}∇w|` on the grid.
    pub time_derivative_bound: f64,
    pub gradient_bound: f64,
    /// `min` over the grid of the slack in `w ≤ W₁ ≤ W₂ ≤ c₀Z^{1−σ}` (in logs).
    pub ordering_margin: f64,
    pub ordering_pass: bool,
}

impl WeightSystem {
    /// Unit constants; run [`compute_weight_constants`] to populate them.
    pub fn new(
        dim: usize,
        k: f64,
        eps: [f64; 3],
        delta: f64,
        alpha: f64,
        beta: f64,
        window: TimeWindow,
    ) -> Result<Self> {
        window.validate()?;
        if !(k > dim as f64 + 2.0) {
            return Err(Error::invalid(format!(
                "k > d + 2 violated (k = {k}, d = {dim})"
            )));
        }
        let [e0, e1, e2] = eps;
        if !(0.0 <= e0 && e0 < e1 && e1 < e2 && e2 < delta) {
            return Err(Error::invalid(format!(
                "eps0 < eps1 < eps2 < delta violated ({e0}, {e1}, {e2}, {delta})"
            )));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid("weight system needs alpha > 0 and beta > 0"));
        }
        Ok(Self {
            dim,
            k,
            eps,
            delta,
            alpha,
            beta,
            window,
            gammas: [0.0; 8],
            c_bar: [1.0; 9],
            constants: [1.0; 9],
            c0: 1.0,
            sigma: 0.5 * (1.0 - e2 / delta),
        })
    }

    /// `γ₁ = 0` followed by `γ₂…γ₉`.
    pub fn all_gammas(&self) -> [f64; 9] {
        let mut g = [0.0; 9];
        g[1..].copy_from_slice(&self.gammas);
        g
    }

    /// `ε_j(t−s)^α`, `j = 0, 1, 2`.
    pub fn weight(&self, j: usize, s: f64) -> f64 {
        self.eps[j] * (self.window.t - s).max(0.0).powf(self.alpha)
    }

    /// `log w`, `log W₁`, `log W₂`.
    pub fn log_value(&self, j: usize, s: f64, y: &[f64]) -> f64 {
        self.weight(j, s) * self.power().value(y)
    }

    fn power(&self) -> SmoothPower {
        SmoothPower::new(self.beta).expect("beta validated at construction")
    }

    /// Radius beyond which every ratio decays on the window: twice the
    /// location of the slowest envelope peak.
    pub fn verification_radius(&self, m: f64, p: f64, r: f64) -> f64 {
        let b = self.beta;
        let tau = (self.window.t - self.window.b0).powf(self.alpha);
        let decay = (self.eps[1] - self.eps[0]).min(self.eps[2] - self.eps[0]) * tau / self.k;
        let degree = [
            m + 2.0 * b - 2.0,
            m + b - 1.0,
            b,
            p,
            0.5 * r,
            2.0 * b - 2.0,
            1.0,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        2.0 * (degree / (b * decay)).powf(1.0 / b) + 1.0
    }

    /// Default verification grid over `[a₀, b₀] × [−R, R]^d`.
    pub fn verification_samples(&self, radius: f64) -> SampleSet {
        let n_x = if self.dim == 1 { 2001 } else { 161 };
        SampleSet::tensor(self.dim, self.window.a0, self.window.b0, 32, radius, n_x)
    }

    /// The nine ratios of the domination inequalities at `(s, y)`, each
    /// written as `|lhs| / rhs` with the weights divided out analytically.
    fn ratios(&self, field: &CoefficientField, s: f64, y: &[f64]) -> [f64; 9] {
        let tau = (self.window.t - s).max(0.0);
        let ta = tau.powf(self.alpha);
        let (pv, grad, hess) = self.power().jet(y);
        let k = self.k;
        let (e0, e1, e2) = (self.eps[0], self.eps[1], self.eps[2]);
        let damp1 = (-(e1 - e0) * ta * pv / k).exp();
        let damp2 = (-(e2 - e0) * ta * pv / k).exp();
        let q = field.diffusion(s, y);
        let a0 = e0 * ta;
        let gw: DVector<f64> = &grad * a0;
        let hw = &hess * a0 + &grad * grad.transpose() * (a0 * a0);
        let dsw = e0 * self.alpha * tau.powf(self.alpha - 1.0) * pv;
        let gw1: DVector<f64> = &grad * (e1 * ta);
        [
            damp1 * damp1,
            (&q * &gw).norm() * damp1,
            (&q * &hw).trace().abs() * damp1 * damp1,
            dsw.abs() * damp1 * damp1,
            field.diffusion_divergence(s, y).norm() * damp2,
            field.drift(s, y).norm() * damp2,
            field.potential(s, y).max(0.0).sqrt() * damp2,
            hw.trace().abs() * damp1 * damp1,
            (&q * &gw1).norm() * damp2,
        ]
    }
}

struct PointEval {
    scaled: [f64; 9],
    raw: [f64; 9],
    ds_bound: f64,
    grad_bound: f64,
    ordering: f64,
}

/// Sets `γ₂…γ₉`, computes `c̄ᵢ = max(1, sup ratioᵢ·(t−s)^{γᵢ})` on the
/// samples and `cᵢ = c̄ᵢ(t−b₀)^{−γᵢ}`; `c₁ = 1` is confirmed rather than
/// assumed. A ratio whose maximum sits on the outer shell of the grid is
/// reported as unbounded.
pub fn compute_weight_constants(
    field: &CoefficientField,
    m: f64,
    p: f64,
    r: f64,
    ws: &WeightSystem,
    samples: &SampleSet,
) -> Result<(WeightSystem, WeightReport)> {
    if field.dim() != ws.dim {
        return Err(Error::DimensionMismatch {
            expected: ws.dim,
            found: field.dim(),
        });
    }
    if samples.is_empty() {
        return Err(Error::invalid("empty verification grid"));
    }
    let win = ws.window;
    if samples
        .points
        .iter()
        .any(|(s, _)| *s < win.a0 - 1e-12 || *s > win.b0 + 1e-12)
    {
        return Err(Error::invalid("verification samples must lie in [a0, b0]"));
    }
    let mut out = ws.clone();
    out.gammas = gamma_exponents(m, p, r, ws.alpha, ws.beta);
    let gammas = out.all_gammas();
    let power = ws.power();
    let log_z_factor = (1.0 - ws.sigma) * ws.delta;
    let evals: Vec<PointEval> = par::map_collect(&samples.points, |(s, y)| {
        let raw = ws.ratios(field, *s, y);
        let tau = win.t - s;
        let mut scaled = [0.0; 9];
        for i in 0..9 {
            scaled[i] = raw[i] * tau.powf(gammas[i]);
        }
        let pv = power.value(y);
        let lw = ws.weight(0, *s) * pv;
        let w = lw.exp();
        let dsw = ws.eps[0] * ws.alpha * tau.powf(ws.alpha - 1.0) * pv * w;
        let gw = power.gradient(y).norm() * ws.weight(0, *s) * w;
        let l = [
            lw,
            ws.weight(1, *s) * pv,
            ws.weight(2, *s) * pv,
            ws.c0.ln() + log_z_factor * pv,
        ];
        let ordering = l
            .windows(2)
            .map(|x| x[1] - x[0])
            .fold(f64::INFINITY, f64::min);
        PointEval {
            scaled,
            raw,
            ds_bound: dsw / (w * w),
            grad_bound: gw / (w * w),
            ordering,
        }
    });

    let radius = samples
        .points
        .iter()
        .flat_map(|(_, y)| y.iter().map(|c| c.abs()))
        .fold(0.0, f64::max);
    let on_shell = |y: &[f64]| y.iter().any(|c| c.abs() >= radius * (1.0 - 1e-12));

    let mut sup = [0.0f64; 9];
    let mut arg = [0usize; 9];
    for (n, e) in evals.iter().enumerate() {
        for i in 0..9 {
            let v = e.scaled[i];
            if !v.is_finite() {
                let (s, y) = &samples.points[n];
                return Err(Error::NonFinite {
                    what: NAMES[i].into(),
                    detail: format!("ratio {v} at s = {s}, y = {y:?}"),
                });
            }
            if v > sup[i] {
                sup[i] = v;
                arg[i] = n;
            }
        }
    }
    let mut argmax = Vec::with_capacity(9);
    for i in 0..9 {
        let (s, y) = &samples.points[arg[i]];
        let mut loc = vec![*s];
        loc.extend_from_slice(y);
        if sup[i] > 0.0 && on_shell(y) && radius > 0.0 {
            return Err(Error::Unbounded {
                what: NAMES[i].into(),
                value: sup[i],
                location: loc,
            });
        }
        argmax.push(loc);
        out.c_bar[i] = sup[i].max(1.0);
        out.constants[i] = out.c_bar[i] * (win.t - win.b0).powf(-gammas[i]);
    }

    let mut min_margin = [f64::INFINITY; 9];
    let (mut ds_bound, mut grad_bound, mut ordering) = (0.0f64, 0.0f64, f64::INFINITY);
    for e in &evals {
        for ((m, c), r) in min_margin.iter_mut().zip(&out.constants).zip(&e.raw) {
            *m = m.min(c - r);
        }
        ds_bound = ds_bound.max(e.ds_bound);
        grad_bound = grad_bound.max(e.grad_bound);
        ordering = ordering.min(e.ordering);
    }
    if !(ds_bound.is_finite() && grad_bound.is_finite()) {
        return Err(Error::NonFinite {
            what: "w^-2 ds w, w^-2 grad w".into(),
            detail: format!("{ds_bound}, {grad_bound}"),
        });
    }
    let report = WeightReport {
        n_samples: samples.len(),
        radius,
        sup,
        argmax,
        min_margin,
        time_derivative_bound: ds_bound,
        gradient_bound: grad_bound,
        ordering_margin: ordering,
        ordering_pass: ordering >= 0.0,
    };
    Ok((out, report))
}
