use std::f64::consts::E;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kolmo_core::approx::{
    build_cutoff_profile, build_truncated_operator, convergence_sweep, CutoffProfile,
};
use kolmo_core::bounds::TimeWindow;
use kolmo_core::lyapunov::{
    build_time_dependent_w, check_time_dependent, CertificateTarget, LyapunovCase, RateFunction,
    SampleSet, StaticCertificate, TimeDependentLyapunov, WParameters,
};
use kolmo_core::operator::{check_ellipticity, CoefficientField};
use kolmo_core::solver::{solve_kernel_pair, truncation_radius, SolverConfig, SpaceTimeGrid};

fn profile() -> Arc<CutoffProfile> {
    Arc::new(build_cutoff_profile(0.05).unwrap())
}

fn window() -> TimeWindow {
    TimeWindow::new(0.1, 0.2, 0.7, 0.8, 1.0).unwrap()
}

fn variable_diffusion_setup() -> (CoefficientField, TimeDependentLyapunov, SpaceTimeGrid) {
    let field = CoefficientField::example(1.0, 3.0, 2.0, 1).unwrap();
    let cert = StaticCertificate::new(1, 0.25, 3.0, CertificateTarget::WithPotential).unwrap();
    let m = cert
        .estimate_bound(&field, &SampleSet::tensor(1, 0.0, 1.0, 2, 6.0, 1201))
        .unwrap();
    let r = truncation_radius(&cert, &[0.0], m, 1e-6).unwrap();
    let w1 = TimeDependentLyapunov::new(1, 1.0, 0.15, 2.0, 3.0, RateFunction::zero(1.0)).unwrap();
    (
        field,
        w1,
        SpaceTimeGrid::new(1, r, 257, 0.0, 1.0, 256).unwrap(),
    )
}

#[test]
fn sweep_converges_on_variable_diffusion() {
    let (field, w1, grid) = variable_diffusion_setup();
    let levels = [E.powi(2), E.powi(4), E.powi(8)];
    let sweep = convergence_sweep(
        &field,
        &levels,
        &w1,
        profile(),
        &SolverConfig::default(),
        &grid,
        &[0.0],
        &window(),
    )
    .unwrap();
    assert!(sweep.strictly_decreasing, "{:?}", sweep.levels);
    assert!(sweep.levels[2].relative_diff <= 0.05);
    assert!(sweep.levels[0].sup_diff > 0.0);
    assert!(sweep.to_csv().starts_with("n,sup_diff,mass_defect\n"));
}

#[test]
fn huge_level_is_bitwise_identical() {
    let (field, w1, grid) = variable_diffusion_setup();
    let log_max = w1.log_value(0.0, &[grid.radius]);
    let sweep = convergence_sweep(
        &field,
        &[(log_max + 1.0).exp()],
        &w1,
        profile(),
        &SolverConfig::default(),
        &grid,
        &[0.0],
        &window(),
    )
    .unwrap();
    assert!(sweep.levels[0].bitwise_equal);
    assert_eq!(sweep.levels[0].sup_diff, 0.0);
}

#[test]
fn truncation_of_eta_identity_is_a_no_op() {
    let field = CoefficientField::constant(1, 1.0, 0.0).unwrap();
    let w1 = TimeDependentLyapunov::new(1, 1.0, 0.15, 2.0, 3.0, RateFunction::zero(1.0)).unwrap();
    let grid = SpaceTimeGrid::new(1, 4.0, 257, 0.0, 1.0, 256).unwrap();
    let sweep = convergence_sweep(
        &field,
        &[E.powi(2), E.powi(4)],
        &w1,
        profile(),
        &SolverConfig::default(),
        &grid,
        &[0.0],
        &window(),
    )
    .unwrap();
    assert!(sweep.levels.iter().all(|l| l.relative_diff < 1e-12));
}

#[test]
fn sublevel_set_must_contain_the_compact() {
    let (field, w1, grid) = variable_diffusion_setup();
    let err = convergence_sweep(
        &field,
        &[1.5, 2.0],
        &w1,
        profile(),
        &SolverConfig::default(),
        &grid,
        &[0.0],
        &window(),
    );
    assert!(err.is_err());
}

#[test]
fn truncated_operators_stay_elliptic() {
    let (field, w1, _) = variable_diffusion_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<(f64, Vec<f64>)> = (0..1000)
        .map(|_| (rng.gen_range(0.0..1.0), vec![rng.gen_range(-6.0..6.0)]))
        .collect();
    for n in [E.powi(2), E.powi(4), E.powi(8)] {
        let op = build_truncated_operator(&field, n, &w1, profile()).unwrap();
        let rep = check_ellipticity(op.field(), &samples).unwrap();
        assert!(rep.pass && rep.min_margin >= -1e-12, "{rep:?}");
        for (s, x) in &samples {
            let q = op.field().diffusion(*s, x)[(0, 0)];
            assert!(q >= 1.0);
            let wv = w1.value(*s, x);
            if wv <= n {
                assert_eq!(q, field.diffusion(*s, x)[(0, 0)]);
            }
            if wv >= 2.0 * n {
                assert_eq!(q, 1.0);
            }
        }
    }
}

#[test]
fn truncation_region_shrinks_with_the_level() {
    let (field, w1, grid) = variable_diffusion_setup();
    let modified = |n: f64| -> Vec<bool> {
        let op = build_truncated_operator(&field, n, &w1, profile()).unwrap();
        (0..=16)
            .flat_map(|i| {
                let s = i as f64 / 16.0 * 0.99;
                (0..grid.n_nodes()).map(move |j| (s, j))
            })
            .map(|(s, j)| op.cutoff(s, &grid.point(j)) < 1.0)
            .collect()
    };
    let (a, b, c) = (
        modified(E.powi(2)),
        modified(E.powi(4)),
        modified(E.powi(8)),
    );
    assert!(a.iter().any(|v| *v));
    for i in 0..a.len() {
        assert!(!b[i] || a[i]);
        assert!(!c[i] || b[i]);
    }
}

#[test]
fn truncated_kernel_is_dominated() {
    let (field, w1, grid) = variable_diffusion_setup();
    let op = build_truncated_operator(&field, E.powi(2), &w1, profile()).unwrap();
    let (g, g0) =
        solve_kernel_pair(op.field(), 1.0, &[0.0], &SolverConfig::default(), &grid).unwrap();
    let excess = (&g.values - &g0.values)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(excess <= 1e-6);
}

#[test]
fn time_dependent_function_transfers_to_truncations() {
    let w = build_time_dependent_w(WParameters {
        m: 0.0,
        p: 3.0,
        r: 2.0,
        dim: 1,
        case: LyapunovCase::I,
        eps: 0.1,
        delta: 0.2,
        alpha: 2.5,
        t: 1.0,
    })
    .unwrap();
    let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
    let w1 = TimeDependentLyapunov::new(1, 1.0, 0.105, 2.5, 4.0, RateFunction::zero(1.0)).unwrap();
    let samples = SampleSet::standard(1, (0.0, 0.9), 64, 4.0, 129, 7);
    for n in [E.powi(2), E.powi(4), E.powi(8)] {
        let op = build_truncated_operator(&field, n, &w1, profile()).unwrap();
        let rep = check_time_dependent(op.field(), &w, &samples).unwrap();
        assert!(rep.pass, "level {n}: {}", rep.worst_margin);
    }
}
