//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status when any criterion fails.

use std::f64::consts::{E, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kolmo_core::approx::{
    build_cutoff_profile, build_truncated_operator, convergence_sweep, remap_constants,
};
use kolmo_core::bounds::{
    assemble_main_bound, check_mass_bound, check_zeta_bound, compute_weight_constants,
    compute_zeta, envelope_bound, gamma_exponents, largest_root, select_regime,
    verify_kernel_bound, x_root_bound, BoundVariant, RegimeSelection, TimeWindow, WeightSystem,
};
use kolmo_core::lyapunov::{
    build_time_dependent_w, check_static_certificate, check_time_dependent, CertificateTarget,
    LyapunovCase, RateFunction, SampleSet, StaticCertificate, TimeDependentLyapunov, WParameters,
};
use kolmo_core::operator::{CoefficientField, GaussianBump};
use kolmo_core::solver::{
    solve_kernel_slice, solve_reference_kernel_g0, truncation_radius, validate_evolution_identity,
    KernelSlice, SolverConfig, SpaceTimeGrid,
};

/// Outcome of one criterion: verdict and a one-line summary.
type Verdict = (bool, String);

type Criterion = (&'static str, fn() -> Verdict);

fn window() -> TimeWindow {
    TimeWindow::new(0.1, 0.2, 0.7, 0.8, 1.0).unwrap()
}

fn heat(tau: f64, r: f64) -> f64 {
    (4.0 * PI * tau).powf(-0.5) * (-r * r / (4.0 * tau)).exp()
}

/// Largest relative sup-norm deviation, per time node, from
/// `factor(τ)·heat(τ + σ_δ²/2)` on `|y − x| ≤ 3`, `τ ∈ [0.1, 0.9]`.
fn oracle_error(slice: &KernelSlice, factor: impl Fn(f64) -> f64) -> f64 {
    let g = &slice.grid;
    let shift = 0.5 * slice.sigma_delta * slice.sigma_delta;
    let mut worst: f64 = 0.0;
    for n in 0..=g.steps {
        let tau = slice.t - g.time(n);
        if !(0.1 - 1e-12..=0.9 + 1e-12).contains(&tau) {
            continue;
        }
        let (mut diff, mut peak): (f64, f64) = (0.0, 0.0);
        for j in 0..g.n_nodes() {
            let r = g.point(j)[0] - slice.x[0];
            if r.abs() > 3.0 {
                continue;
            }
            let exact = factor(tau) * heat(tau + shift, r);
            diff = diff.max((slice.values[[n, j]] - exact).abs());
            peak = peak.max(exact);
        }
        worst = worst.max(diff / peak);
    }
    worst
}

fn laplace_grid() -> SpaceTimeGrid {
    SpaceTimeGrid::new(1, 8.0, 513, 0.0, 1.0, 512).unwrap()
}

/// Example operator, its certificate with the sampled `M`, and the grid with
/// the truncation radius for a 1e−6 mass defect.
fn example(
    m: f64,
    p: f64,
    r: f64,
    delta: f64,
    beta: f64,
    nodes: usize,
) -> (CoefficientField, StaticCertificate, SpaceTimeGrid) {
    let field = CoefficientField::example(m, p, r, 1).unwrap();
    let cert = StaticCertificate::new(1, delta, beta, CertificateTarget::WithPotential).unwrap();
    let bound = cert
        .estimate_bound(&field, &SampleSet::tensor(1, 0.0, 1.0, 2, 6.0, 1201))
        .unwrap();
    let cert = cert.with_bound(bound).unwrap();
    let radius = truncation_radius(&cert, &[0.0], bound, 1e-6).unwrap();
    let grid = SpaceTimeGrid::new(1, radius, nodes, 0.0, 1.0, nodes - 1).unwrap();
    (field, cert, grid)
}

fn slice(field: &CoefficientField, grid: &SpaceTimeGrid) -> KernelSlice {
    solve_kernel_slice(field, 1.0, &[0.0], &SolverConfig::default(), grid).unwrap()
}

fn w_example(delta: f64) -> TimeDependentLyapunov {
    build_time_dependent_w(WParameters {
        m: 0.0,
        p: 3.0,
        r: 2.0,
        dim: 1,
        case: LyapunovCase::I,
        eps: 0.1,
        delta,
        alpha: 2.5,
        t: 1.0,
    })
    .unwrap()
}

fn gaussian_oracle() -> Verdict {
    let start = Instant::now();
    let s = slice(&CoefficientField::laplacian(1), &laplace_grid());
    let err = oracle_error(&s, |_| 1.0);
    let secs = start.elapsed().as_secs_f64();
    (
        err <= 0.02 && secs <= 30.0,
        format!("max relative error {err:.3e} (tol 2e-2), {secs:.2}s (limit 30s)"),
    )
}

fn constant_potential() -> Verdict {
    let field = CoefficientField::constant(1, 1.0, 1.0).unwrap();
    let s = slice(&field, &laplace_grid());
    let err = oracle_error(&s, |tau| (-tau).exp());
    (
        err <= 0.02,
        format!("max relative error vs e^-tau * Gaussian {err:.3e} (tol 2e-2)"),
    )
}

fn sub_markov_domination() -> Verdict {
    let (field, _, grid) = example(0.0, 3.0, 2.0, 0.12, 4.0, 513);
    let g = slice(&field, &grid);
    let g0 =
        solve_reference_kernel_g0(&field, 1.0, &[0.0], &SolverConfig::default(), &grid).unwrap();
    let mass = g.masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let excess = (&g.values - &g0.values)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (
        mass <= 1.0 + 1e-6 && excess <= 1e-6,
        format!("max mass {mass:.9} (limit 1+1e-6), max g - g0 {excess:.3e} (limit 1e-6)"),
    )
}

fn evolution_identity() -> Verdict {
    let cfg = SolverConfig::default();
    let (field, _, grid) = example(0.0, 3.0, 2.0, 0.12, 4.0, 513);
    let bump = GaussianBump::new(vec![0.2], 0.3, 1.0).unwrap();
    let r_ex =
        validate_evolution_identity(&field, &bump, 1.0, 0.1, 0.9, &[0.0], &cfg, &grid).unwrap();
    let lap = CoefficientField::laplacian(1);
    let bump = GaussianBump::new(vec![0.3], 0.5, 1.0).unwrap();
    let r_lap =
        validate_evolution_identity(&lap, &bump, 1.0, 0.1, 0.9, &[0.0], &cfg, &laplace_grid())
            .unwrap();
    (
        r_ex <= 5e-2 && r_lap <= 2e-2,
        format!(
            "example residual {r_ex:.3e} (tol 5e-2), Laplacian residual {r_lap:.3e} (tol 2e-2)"
        ),
    )
}

fn certificate_suite() -> Verdict {
    let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
    let cert = StaticCertificate::new(1, 0.2, 4.0, CertificateTarget::WithPotential).unwrap();
    let stat =
        check_static_certificate(&field, &cert, &SampleSet::tensor(1, 0.0, 1.0, 2, 6.0, 1201))
            .unwrap();
    let m = stat.bound_m.unwrap_or(f64::INFINITY);
    let asym = stat.asymptotic.iter().all(|a| a.pass);
    let static_ok = stat.pass && m.is_finite() && asym;

    let w = w_example(0.2);
    let samples = SampleSet::standard(1, (0.0, 0.9), 64, 4.0, 129, 7);
    let td = check_time_dependent(&field, &w, &samples).unwrap();
    let td_ok = td.pass && td.worst_margin >= -1e-8;

    let w1 = TimeDependentLyapunov::new(1, 1.0, 0.105, 2.5, 4.0, RateFunction::zero(1.0)).unwrap();
    let profile = Arc::new(build_cutoff_profile(0.05).unwrap());
    let mut worst_trunc = f64::INFINITY;
    let mut trunc_ok = true;
    for n in [E.powi(2), E.powi(4), E.powi(8)] {
        let op = build_truncated_operator(&field, n, &w1, profile.clone()).unwrap();
        let rep = check_time_dependent(op.field(), &w, &samples).unwrap();
        trunc_ok &= rep.pass && rep.worst_margin >= -1e-8;
        worst_trunc = worst_trunc.min(rep.worst_margin);
    }
    (
        static_ok && td_ok && trunc_ok,
        format!(
            "static: M = {m:.4e}, asymptotic sign check {} (leading coefficients {:?}); \
             time-dependent worst margin {:.3e}; truncated operators worst margin {worst_trunc:.3e}",
            if asym { "passes" } else { "FAILS" },
            stat.asymptotic.iter().map(|a| a.leading_coefficient).collect::<Vec<_>>(),
            td.worst_margin,
        ),
    )
}

fn zeta_and_mass() -> Verdict {
    let (field, cert, grid) = example(0.0, 3.0, 2.0, 0.12, 4.0, 513);
    let s = slice(&field, &grid);
    let w = w_example(0.12);
    let prof = compute_zeta(&s, &w, &window()).unwrap();
    let zeta = check_zeta_bound(&prof, &w, 0.02);
    let mass = check_mass_bound(&s, &cert, 0.02).unwrap();
    (
        zeta.pass && zeta.max_ratio <= 1.02 && zeta.phi_monotone && mass.pass,
        format!(
            "zeta ratio max {:.6} (tol 1.02), Phi min relative increment {:.3e} (slack -1e-6), mass ratio max {:.6}",
            zeta.max_ratio, zeta.phi_min_increment, mass.max_ratio
        ),
    )
}

fn envelope_and_roots() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut env_violations = 0;
    for _ in 0..10_000 {
        let (g, tau, b, z) = (
            rng.gen_range(0.0..8.0),
            rng.gen_range(0.01..10.0),
            rng.gen_range(0.5..6.0),
            rng.gen_range(0.0..20.0f64),
        );
        let lhs = z.powf(g) * (-tau * z.powf(b)).exp();
        if lhs > envelope_bound(g, tau, b) * (1.0 + 1e-12) {
            env_violations += 1;
        }
    }
    let mut root_violations = 0;
    for _ in 0..1_000 {
        let (a, b, g, k) = (
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..10.0),
            rng.gen_range(2.01..10.0),
        );
        if largest_root(a, b, g, k) > x_root_bound(a, b, g, k) + 1e-9 {
            root_violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        env_violations == 0 && root_violations == 0 && secs <= 5.0,
        format!("{env_violations} envelope and {root_violations} root-bound violations, {secs:.3}s (limit 5s)"),
    )
}

fn shape_verification() -> Verdict {
    let fit = |m: f64, p: f64, r: f64, sel: RegimeSelection| {
        let start = Instant::now();
        let (field, _, grid) = example(m, p, r, 0.12, 4.0, 513);
        let coarse = slice(&field, &grid);
        let fine = slice(&field, &grid.refined(2).unwrap());
        let v = verify_kernel_bound(&coarse, &fine, &sel, 2.5, 0.1, 4.0, &window()).unwrap();
        (v, start.elapsed().as_secs_f64())
    };
    let (r1, t1) = fit(0.0, 3.0, 2.0, select_regime(0.0, 3.0, 2.0).unwrap());
    let (r2, t2) = fit(0.0, 2.0, 6.0, select_regime(0.0, 2.0, 6.0).unwrap());
    let (neg, t3) = fit(
        0.0,
        3.0,
        2.0,
        RegimeSelection::forced(0.0, 3.0, 2.0, 2).unwrap(),
    );
    let ok1 = r1.regime == 1 && r1.c_fit.is_finite() && r1.relative_change <= 0.25 && t1 <= 180.0;
    let ok2 = r2.regime == 2 && r2.c_fit.is_finite() && r2.relative_change <= 0.25 && t2 <= 180.0;
    let ok_neg = neg.relative_change > 0.5 && t3 <= 180.0;
    (
        ok1 && ok2 && ok_neg,
        format!(
            "regime 1 (0,3,2): C_fit {:.4e} -> {:.4e}, change {:.1}% [{}], {t1:.1}s; \
             regime 2 (0,2,6): C_fit {:.4e} -> {:.4e}, change {:.1}% [{}], {t2:.1}s; \
             negative control (0,3,2) forced regime 2: change {:.1}% (needs > 50%) [{}], {t3:.1}s",
            r1.c_fit,
            r1.c_fit_refined,
            100.0 * r1.relative_change,
            if ok1 { "ok" } else { "red" },
            r2.c_fit,
            r2.c_fit_refined,
            100.0 * r2.relative_change,
            if ok2 { "ok" } else { "red" },
            100.0 * neg.relative_change,
            if ok_neg { "ok" } else { "red" },
        ),
    )
}

fn approximation_convergence() -> Verdict {
    let (field, _, grid) = example(1.0, 3.0, 2.0, 0.25, 3.0, 257);
    let w1 = TimeDependentLyapunov::new(1, 1.0, 0.15, 2.0, 3.0, RateFunction::zero(1.0)).unwrap();
    let profile = Arc::new(build_cutoff_profile(0.05).unwrap());
    let levels = [E.powi(2), E.powi(4), E.powi(8)];
    let sweep = convergence_sweep(
        &field,
        &levels,
        &w1,
        profile.clone(),
        &SolverConfig::default(),
        &grid,
        &[0.0],
        &window(),
    )
    .unwrap();
    let top = sweep.levels.last().unwrap().relative_diff;
    let dphi = (0..=10_000)
        .map(|i| {
            let t = 2.5 * i as f64 / 10_000.0;
            (t * profile.derivative(t)).abs()
        })
        .fold(0.0, f64::max);
    (
        sweep.strictly_decreasing && top <= 0.05 && dphi <= 2.0,
        format!(
            "sup diffs {:?}, top-level relative {top:.3e} (tol 5e-2), max |t phi'| {dphi:.4} (limit 2)",
            sweep.levels.iter().map(|l| format!("{:.3e}", l.sup_diff)).collect::<Vec<_>>()
        ),
    )
}

fn exact_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut remap_bad = 0;
    for _ in 0..100 {
        let c: Vec<f64> = (0..5).map(|_| rng.gen_range(1.0..50.0)).collect();
        let eta = rng.gen_range(0.01..5.0);
        let got = remap_constants(c[0], c[1], c[2], c[3], c[4], eta);
        if got != (2.0 * c[0], c[1] + eta * c[3], c[2] + 4.0 * c[4]) {
            remap_bad += 1;
        }
    }

    // Dyadic constants, integrals and window gap keep every floating
    // operation exact, so the identity is checked bit for bit.
    let dyadic = TimeWindow::new(0.125, 0.25, 0.5, 0.75, 1.0).unwrap();
    let mut ws = WeightSystem::new(1, 4.0, [0.1, 0.105, 0.11], 0.12, 2.5, 4.0, dyadic).unwrap();
    let mut diff_bad = 0;
    for _ in 0..100 {
        for c in ws.constants.iter_mut() {
            *c = rng.gen_range(8..64) as f64 / 8.0;
        }
        let (s, i1, i2) = (
            rng.gen_range(0..32) as f64 / 16.0,
            rng.gen_range(0..32) as f64 / 16.0,
            rng.gen_range(0..32) as f64 / 16.0,
        );
        let a = assemble_main_bound(&ws, s, i1, i2, BoundVariant::Bounded);
        let b = assemble_main_bound(&ws, s, i1, i2, BoundVariant::General);
        let expect = ws.constants[7].powf(0.5 * ws.k) * i1 + ws.constants[8].powf(ws.k) * i2;
        if b - a != expect {
            diff_bad += 1;
        }
    }

    // Shipped weight system: generic floats, so only rounding-level agreement
    // is possible; reported in units of the bound's last place.
    let ws = WeightSystem::new(1, 4.0, [0.1, 0.105, 0.11], 0.12, 2.5, 4.0, window()).unwrap();
    let field = CoefficientField::example(0.0, 3.0, 2.0, 1).unwrap();
    let radius = ws.verification_radius(0.0, 3.0, 2.0);
    let (ws, _) =
        compute_weight_constants(&field, 0.0, 3.0, 2.0, &ws, &ws.verification_samples(radius))
            .unwrap();
    let mut max_ulps: f64 = 0.0;
    for _ in 0..100 {
        let (s, i1, i2) = (
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
        );
        let a = assemble_main_bound(&ws, s, i1, i2, BoundVariant::Bounded);
        let b = assemble_main_bound(&ws, s, i1, i2, BoundVariant::General);
        let expect = ws.constants[7].powf(0.5 * ws.k) * i1 + ws.constants[8].powf(ws.k) * i2;
        max_ulps = max_ulps.max(((b - a) - expect).abs() / (b * f64::EPSILON));
    }
    let gammas = gamma_exponents(0.0, 3.0, 2.0, 2.5, 4.0);
    let table_ok = gammas[..6] == [0.0, 0.0, 1.0, 0.0, 1.875, 0.625];
    (
        remap_bad == 0 && diff_bad == 0 && table_ok,
        format!(
            "remap mismatches {remap_bad}/100, general - bounded mismatches {diff_bad}/100 on dyadic inputs \
             (shipped constants: max deviation {max_ulps:.2} ulp of the bound), gamma table {:?}",
            &gammas[..6]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Gaussian oracle", gaussian_oracle),
        ("constant-potential factorization", constant_potential),
        ("sub-Markov and domination", sub_markov_domination),
        ("evolution identity", evolution_identity),
        ("certificate suite", certificate_suite),
        ("zeta and mass bounds", zeta_and_mass),
        ("envelope and root bounds", envelope_and_roots),
        ("kernel bound shape", shape_verification),
        ("approximation convergence", approximation_convergence),
        ("exact identities", exact_identities),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
