/// `τ^{−γ/β}(γ/β)^{γ/β}e^{−γ/β}`, the maximum of `z ↦ z^γ e^{−τz^β}` on `z > 0`.
pub fn envelope_bound(gamma: f64, tau: f64, beta: f64) -> f64 {
    let q = gamma / beta;
    if q == 0.0 {
        return 1.0;
    }
    tau.powf(-q) * q.powf(q) * (-q).exp()
}

/// `B = (4/3)β + √((4/3)γ) + ((4/3)α²)^{1/k}`: every `X ≥ 0` with
/// `Xᵏ ≤ (4/3)α² + (4/3)βX^{k−1} + (4/3)γX^{k−2}` satisfies `X ≤ B`.
pub fn x_root_bound(alpha: f64, beta: f64, gamma: f64, k: f64) -> f64 {
    let c = 4.0 / 3.0;
    c * beta + (c * gamma).sqrt() + (c * alpha * alpha).powf(1.0 / k)
}

/// `f(X) = Xᵏ − (4/3)βX^{k−1} − (4/3)γX^{k−2} − (4/3)α²`.
pub fn root_polynomial(alpha: f64, beta: f64, gamma: f64, k: f64, x: f64) -> f64 {
    let c = 4.0 / 3.0;
    x.powf(k - 2.0) * (x * x - c * beta * x - c * gamma) - c * alpha * alpha
}

/// Largest nonnegative root of [`root_polynomial`] by bisection.
///
/// Below the positive root `r₀` of `X² − (4/3)βX − (4/3)γ` the polynomial is
/// `≤ −(4/3)α²`; above it the polynomial is increasing, so the largest root
/// is the unique root in `[r₀, ∞)`.
pub fn largest_root(alpha: f64, beta: f64, gamma: f64, k: f64) -> f64 {
    let c = 4.0 / 3.0;
    let (b, g) = (c * beta, c * gamma);
    let r0 = 0.5 * (b + (b * b + 4.0 * g).sqrt());
    let f = |x: f64| root_polynomial(alpha, beta, gamma, k, x);
    if f(r0) >= 0.0 {
        return r0;
    }
    let mut lo = r0;
    let mut hi = (2.0 * r0).max(1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn envelope_examples() {
        assert!((envelope_bound(4.0, 1.0, 4.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(envelope_bound(0.0, 3.0, 2.0), 1.0);
        let e = envelope_bound(2.0, 4.0, 2.0);
        assert!((e - 0.25 * (-1.0f64).exp()).abs() < 1e-15);
        let numeric = (1..200_000)
            .map(|i| {
                let z = i as f64 * 1e-5;
                z * z * (-4.0 * z * z).exp()
            })
            .fold(0.0, f64::max);
        assert!((numeric - e).abs() < 1e-9);
    }

    #[test]
    fn root_bound_examples() {
        assert_eq!(x_root_bound(0.0, 0.0, 0.0, 4.0), 0.0);
        assert_eq!(x_root_bound(0.0, 3.0, 0.0, 4.0), 4.0);
        assert!((largest_root(0.0, 3.0, 0.0, 4.0) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn envelope_dominates(g in 0.0f64..8.0, tau in 0.01f64..10.0, b in 0.5f64..6.0, z in 0.0f64..20.0) {
            let lhs = z.powf(g) * (-tau * z.powf(b)).exp();
            let env = envelope_bound(g, tau, b);
            prop_assert!(lhs <= env * (1.0 + 1e-12));
        }

        #[test]
        fn root_below_bound(a in 0.0f64..10.0, b in 0.0f64..10.0, g in 0.0f64..10.0, k in 2.01f64..12.0) {
            let bound = x_root_bound(a, b, g, k);
            let root = largest_root(a, b, g, k);
            prop_assert!(root <= bound + 1e-9);
            prop_assert!(root_polynomial(a, b, g, k, bound) >= -1e-9);
        }
    }
}
