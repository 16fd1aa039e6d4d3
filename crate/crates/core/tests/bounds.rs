use kolmo_core::bounds::{
    check_mass_bound, check_zeta_bound, compute_gamma_moments, compute_weight_constants,
    compute_zeta, select_regime, verify_kernel_bound, RegimeSelection, TimeWindow, WeightSystem,
};
use kolmo_core::lyapunov::{
    build_time_dependent_w, CertificateTarget, LyapunovCase, RateFunction, SampleSet,
    StaticCertificate, TimeDependentLyapunov, WParameters,
};
use kolmo_core::operator::CoefficientField;
use kolmo_core::solver::{
    solve_kernel_slice, truncation_radius, KernelSlice, SolverConfig, SpaceTimeGrid,
};

fn window() -> TimeWindow {
    TimeWindow::new(0.1, 0.2, 0.7, 0.8, 1.0).unwrap()
}

fn laplace_slice(potential: f64) -> KernelSlice {
    let field = CoefficientField::constant(1, 1.0, potential).unwrap();
    let grid = SpaceTimeGrid::new(1, 8.0, 513, 0.0, 1.0, 512).unwrap();
    solve_kernel_slice(&field, 1.0, &[0.0], &SolverConfig::default(), &grid).unwrap()
}

fn example_slice(nodes: usize, steps: usize) -> (CoefficientField, StaticCertificate, KernelSlice) {
    let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
    let cert = StaticCertificate::new(1, 0.12, 4.0, CertificateTarget::WithPotential).unwrap();
    let m = cert
        .estimate_bound(&field, &SampleSet::tensor(1, 0.0, 1.0, 2, 6.0, 1201))
        .unwrap();
    let cert = cert.with_bound(m).unwrap();
    let r = truncation_radius(&cert, &[0.0], m, 1e-6).unwrap();
    let grid = SpaceTimeGrid::new(1, r, nodes, 0.0, 1.0, steps).unwrap();
    let slice = solve_kernel_slice(&field, 1.0, &[0.0], &SolverConfig::default(), &grid).unwrap();
    (field, cert, slice)
}

fn example_w() -> TimeDependentLyapunov {
    build_time_dependent_w(WParameters {
        m: 0.0,
        p: 3.0,
        r: 2.0,
        dim: 1,
        case: LyapunovCase::I,
        eps: 0.1,
        delta: 0.12,
        alpha: 2.5,
        t: 1.0,
    })
    .unwrap()
}

#[test]
fn gamma_moments_trivial_cases() {
    let lap = laplace_slice(0.0);
    let field = CoefficientField::laplacian(1);
    let g = compute_gamma_moments(&lap, &field, 4.0, &window()).unwrap();
    assert_eq!(g.gamma1, 0.0);
    assert_eq!(g.gamma2, 0.0);

    let c = 1.0;
    let slice = laplace_slice(c);
    let field = CoefficientField::constant(1, 1.0, c).unwrap();
    let k = 4.0;
    let g = compute_gamma_moments(&slice, &field, k, &window()).unwrap();
    let (k0, k1) = window().indices(&slice.grid).unwrap();
    let ds = slice.grid.ds();
    let mass: f64 = slice.masses[k0..=k1]
        .windows(2)
        .map(|w| 0.5 * ds * (w[0] + w[1]))
        .sum();
    let expect = c * mass.powf(2.0 / k);
    assert!(
        (g.gamma2 - expect).abs() <= 1e-12 * expect,
        "{} vs {expect}",
        g.gamma2
    );
}

#[test]
fn gamma_moments_stable_under_refinement() {
    let (field, _, coarse) = example_slice(257, 256);
    let (_, _, fine) = example_slice(513, 512);
    let a = compute_gamma_moments(&coarse, &field, 4.0, &window()).unwrap();
    let b = compute_gamma_moments(&fine, &field, 4.0, &window()).unwrap();
    assert!(a.gamma1 > 0.0 && a.gamma2 > 0.0);
    assert!((a.gamma1 - b.gamma1).abs() <= 0.1 * b.gamma1);
    assert!((a.gamma2 - b.gamma2).abs() <= 0.1 * b.gamma2);
}

#[test]
fn zeta_of_unit_weight_is_the_mass() {
    let slice = laplace_slice(0.5);
    let one = TimeDependentLyapunov::new(1, 1.0, 0.0, 1.0, 0.0, RateFunction::zero(1.0)).unwrap();
    let prof = compute_zeta(&slice, &one, &window()).unwrap();
    for (z, m) in prof.values.iter().zip(&slice.masses) {
        assert!((z - m).abs() <= 1e-12);
    }
    let rep = check_zeta_bound(&prof, &one, 0.02);
    assert!(rep.pass && rep.max_ratio <= 1.0 + 1e-12);
    assert!((prof.values.last().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn zeta_matches_gaussian_moment() {
    let slice = laplace_slice(0.0);
    let eps = 0.1;
    let w = TimeDependentLyapunov::new(1, 1.0, eps, 1.0, 2.0, RateFunction::zero(1.0)).unwrap();
    let prof = compute_zeta(&slice, &w, &window()).unwrap();
    let sigma2 = slice.sigma_delta * slice.sigma_delta;
    for (s, z) in prof.times.iter().zip(&prof.values) {
        let tau = 1.0 - s;
        if !(0.1..=0.9).contains(&tau) {
            continue;
        }
        let var = 2.0 * tau + sigma2;
        let exact = (1.0 - 2.0 * eps * tau * var).powf(-0.5);
        assert!((z - exact).abs() <= 0.02 * exact, "s = {s}: {z} vs {exact}");
    }
}

#[test]
fn halved_rate_is_detected() {
    let slice = laplace_slice(0.0);
    let rate = RateFunction {
        coefficient: 1.0,
        exponent: 0.0,
        t: 1.0,
        cutoff: 0.0,
    };
    let w = TimeDependentLyapunov::new(1, 1.0, 1.0, 1.0, 0.0, rate).unwrap();
    let prof = compute_zeta(&slice, &w, &window()).unwrap();
    let good = check_zeta_bound(&prof, &w, 0.02);
    assert!(good.pass, "{}", good.max_ratio);
    let halved = w.clone().with_rate(rate.scaled(0.5));
    let bad = check_zeta_bound(&prof, &halved, 0.02);
    assert!(!bad.pass && bad.max_ratio > 1.02);
}

#[test]
fn example_zeta_and_mass_bounds() {
    let (_, cert, slice) = example_slice(513, 512);
    let w = example_w();
    let prof = compute_zeta(&slice, &w, &window()).unwrap();
    let rep = check_zeta_bound(&prof, &w, 0.02);
    assert!(
        rep.pass,
        "ratio {} phi {}",
        rep.max_ratio, rep.phi_min_increment
    );
    let mass = check_mass_bound(&slice, &cert, 0.02).unwrap();
    assert!(mass.pass, "{}", mass.max_ratio);
    let last = *mass.lhs.last().unwrap();
    assert!((last - cert.value(&[0.0])).abs() < 1e-3);
}

#[test]
fn weight_system_on_the_example() {
    let ws = WeightSystem::new(1, 4.0, [0.1, 0.105, 0.11], 0.12, 2.5, 4.0, window()).unwrap();
    let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
    let radius = ws.verification_radius(0.0, 3.0, 2.0);
    let (ws, rep) =
        compute_weight_constants(&field, 0.0, 3.0, 2.0, &ws, &ws.verification_samples(radius))
            .unwrap();
    assert_eq!(&ws.gammas[..6], &[0.0, 0.0, 1.0, 0.0, 1.875, 0.625]);
    assert!(rep.ordering_pass);
    assert!(rep.min_margin[5] >= 0.0);
    assert!((ws.sigma - 0.5 * (1.0 - 0.11 / 0.12)).abs() < 1e-15);
}

#[test]
fn regime_one_fit_is_stable() {
    let (_, _, coarse) = example_slice(257, 256);
    let (_, _, fine) = example_slice(513, 512);
    let sel = select_regime(0.0, 3.0, 2.0).unwrap();
    let v = verify_kernel_bound(&coarse, &fine, &sel, 2.5, 0.1, 4.0, &window()).unwrap();
    assert!(v.pass, "{v:?}");
    assert_eq!(v.exponent, -6.5);
    assert!((v.margins.max - v.c_fit.ln()).abs() < 1e-12);
    let forced = RegimeSelection::forced(0.0, 3.0, 2.0, 2).unwrap();
    assert_eq!(forced.beta, 2.0);
    assert!(verify_kernel_bound(&coarse, &fine, &sel, 1.5, 0.1, 4.0, &window()).is_err());
}
