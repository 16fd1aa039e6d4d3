use std::fmt::Write as _;

use crate::{Error, Result};

const NODES: usize = 10_000;
const KERNEL_POINTS: usize = 2001;

/// Even cutoff `φ`: `1` on `[−1,1]`, `0` outside `(−2,2)`, a mollified
/// logarithmic ramp in between. Tabulated on `[1,2]` and evaluated by cubic
/// Hermite interpolation.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    mu: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    max_t_dphi: f64,
}

/// Log ramp from `1` at `1+μ/2` to `0` at `2−μ/2`, convolved with a smooth
/// bump of half-width `μ/2`; `max |tφ′| ≤ 2` is verified before returning.
pub fn build_cutoff_profile(mu: f64) -> Result<CutoffProfile> {
    if !(mu > 0.0 && mu < 0.2) {
        return Err(Error::invalid(format!(
            "mollification width must lie in (0, 0.2), got {mu}"
        )));
    }
    let (lo, hi) = (1.0 + 0.5 * mu, 2.0 - 0.5 * mu);
    let log_span = (hi / lo).ln();
    let ramp = |t: f64| {
        if t <= lo {
            1.0
        } else if t >= hi {
            0.0
        } else {
            (hi / t).ln() / log_span
        }
    };
    let ramp_slope = |t: f64| {
        if t > lo && t < hi {
            -1.0 / (t * log_span)
        } else {
            0.0
        }
    };
    let half = 0.5 * mu;
    let offsets: Vec<f64> = (0..KERNEL_POINTS)
        .map(|j| -half + mu * j as f64 / (KERNEL_POINTS - 1) as f64)
        .collect();
    let raw: Vec<f64> = offsets
        .iter()
        .map(|u| {
            let z = u / half;
            if z.abs() < 1.0 {
                (-1.0 / (1.0 - z * z)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let node = |i: usize| 1.0 + i as f64 / NODES as f64;
    let (phi, dphi): (Vec<f64>, Vec<f64>) = (0..=NODES)
        .map(|i| {
            let t = node(i);
            offsets
                .iter()
                .zip(&weights)
                .fold((0.0, 0.0), |(v, d), (u, w)| {
                    (v + w * ramp(t - u), d + w * ramp_slope(t - u))
                })
        })
        .unzip();
    let mut profile = CutoffProfile {
        mu,
        phi,
        dphi,
        max_t_dphi: 0.0,
    };
    for v in profile.phi.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    profile.phi[0] = 1.0;
    profile.dphi[0] = 0.0;
    profile.phi[NODES] = 0.0;
    profile.dphi[NODES] = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..NODES {
        for t in [node(i), node(i) + 0.5 / NODES as f64] {
            worst = worst.max((t * profile.derivative(t)).abs());
        }
        if profile.phi[i + 1] > profile.phi[i] + 1e-14 || profile.dphi[i] > 1e-14 {
            return Err(Error::invalid(format!(
                "cutoff profile is not nonincreasing near t = {}",
                node(i)
            )));
        }
    }
    if worst > 2.0 {
        return Err(Error::invalid(format!(
            "|t phi'(t)| <= 2 violated after mollification: measured max {worst}"
        )));
    }
    profile.max_t_dphi = worst;
    Ok(profile)
}

impl CutoffProfile {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Verified `max |tφ′(t)|`.
    pub fn max_t_derivative(&self) -> f64 {
        self.max_t_dphi
    }

    fn locate(&self, a: f64) -> (usize, f64) {
        let x = (a - 1.0) * NODES as f64;
        let i = (x.floor() as usize).min(NODES - 1);
        (i, x - i as f64)
    }

    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 {
            return 1.0;
        }
        if a >= 2.0 {
            return 0.0;
        }
        let (i, u) = self.locate(a);
        let h = 1.0 / NODES as f64;
        let (p0, p1, m0, m1) = (
            self.phi[i],
            self.phi[i + 1],
            self.dphi[i] * h,
            self.dphi[i + 1] * h,
        );
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 1.0 || a >= 2.0 {
            return 0.0;
        }
        let (i, u) = self.locate(a);
        let h = 1.0 / NODES as f64;
        let (p0, p1, m0, m1) = (
            self.phi[i],
            self.phi[i + 1],
            self.dphi[i] * h,
            self.dphi[i + 1] * h,
        );
        let u2 = u * u;
        let d = ((6.0 * u2 - 6.0 * u) * p0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * p1
            + (3.0 * u2 - 2.0 * u) * m1)
            / h;
        d * t.signum()
    }

    /// CSV `t,phi,tphi_prime` on `n` points of `[0, 2.5]`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("t,phi,tphi_prime\n");
        for i in 0..n {
            let t = 2.5 * i as f64 / (n.max(2) - 1) as f64;
            let _ = writeln!(
                out,
                "{t:.6},{:.12e},{:.12e}",
                self.value(t),
                t * self.derivative(t)
            );
        }
        out
    }
}
