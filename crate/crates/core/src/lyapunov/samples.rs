use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sample points `(s, x)` for sampled inequality checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<(f64, Vec<f64>)>,
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl SampleSet {
    /// Tensor grid: `n_s` times in `[s_lo, s_hi]` times `n_x` nodes per
    /// axis in `[−radius, radius]^dim`.
    pub fn tensor(dim: usize, s_lo: f64, s_hi: f64, n_s: usize, radius: f64, n_x: usize) -> Self {
        let ss = linspace(s_lo, s_hi, n_s);
        let xs = linspace(-radius, radius, n_x);
        let mut spatial: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..dim {
            spatial = spatial
                .into_iter()
                .flat_map(|p| {
                    xs.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        let points = ss
            .iter()
            .flat_map(|&s| spatial.iter().map(move |x| (s, x.clone())))
            .collect();
        Self { points }
    }

    /// `n` uniform points in `[s_lo, s_hi] × [−radius, radius]^dim`.
    pub fn random(dim: usize, s_lo: f64, s_hi: f64, radius: f64, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                let s = if s_hi > s_lo {
                    rng.gen_range(s_lo..s_hi)
                } else {
                    s_lo
                };
                let x = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
                (s, x)
            })
            .collect();
        Self { points }
    }

    /// Tensor grid plus 10³ seeded random points.
    pub fn standard(
        dim: usize,
        s_range: (f64, f64),
        n_s: usize,
        radius: f64,
        n_x: usize,
        seed: u64,
    ) -> Self {
        let mut set = Self::tensor(dim, s_range.0, s_range.1, n_s, radius, n_x);
        set.points
            .extend(Self::random(dim, s_range.0, s_range.1, radius, 1000, seed).points);
        set
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
