use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::approx::{build_cutoff_profile, build_truncated_operator, convergence_sweep, remap_all};
use crate::bounds::{
    assemble_main_bound, check_mass_bound, check_zeta_bound, compute_gamma_moments,
    compute_weight_constants, compute_zeta, main_bound_from_constants, sweep_csv,
    verify_kernel_bound, BoundVariant, SweepRow, WeightSystem,
};
use crate::lyapunov::{
    build_time_dependent_w, check_static_certificate, check_time_dependent, CertificateTarget,
    RateFunction, SampleSet, StaticCertificate, TimeDependentLyapunov, WParameters,
};
use crate::operator::{check_ellipticity, CoefficientField};
use crate::solver::{
    solve_kernel_pair, solve_kernel_slice, truncation_floor, truncation_radius_unclamped,
    KernelSlice, SpaceTimeGrid,
};
use crate::{par, Error, Result};

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Certify,
    Solve,
    Moments,
    Bounds,
    Approx,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Certify,
        Stage::Solve,
        Stage::Moments,
        Stage::Bounds,
        Stage::Approx,
    ];

    /// Stages whose outputs this stage consumes.
    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Certify | Stage::Approx => &[],
            Stage::Solve => &[Stage::Certify],
            Stage::Moments | Stage::Bounds => &[Stage::Solve],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pass,
    /// A verification did not hold.
    Fail,
    /// A solver or numerical failure.
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub status: StageStatus,
    pub messages: Vec<String>,
    pub wall_seconds: f64,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub name: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub output: PathBuf,
    pub stages: Vec<StageReport>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    /// The report with every wall-clock field zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for s in &mut r.stages {
            s.wall_seconds = 0.0;
        }
        r
    }
}

/// Exit code of a set of stage results: 3 on any numerical error, 2 on any
/// failed verification, 0 otherwise.
pub fn exit_code(stages: &[StageReport]) -> i32 {
    if stages.iter().any(|s| s.status == StageStatus::Error) {
        3
    } else if stages.iter().any(|s| s.status == StageStatus::Fail) {
        2
    } else {
        0
    }
}

struct Outcome {
    status: StageStatus,
    messages: Vec<String>,
    details: Value,
}

impl Outcome {
    fn new(pass: bool, messages: Vec<String>, details: Value) -> Self {
        Self {
            status: if pass {
                StageStatus::Pass
            } else {
                StageStatus::Fail
            },
            messages,
            details,
        }
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    field: CoefficientField,
    x: Vec<f64>,
    out: PathBuf,
    cert: Option<StaticCertificate>,
    ws: Vec<TimeDependentLyapunov>,
    slice: Option<KernelSlice>,
    zeta_unreliable: bool,
    warnings: Vec<String>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every stage whose inputs are configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_stages(cfg, &Stage::ALL)
}

/// Runs the requested stages plus their dependencies and writes
/// `report.json` to the output directory. Configuration errors are returned
/// as `Err`; stage failures are recorded in the report.
pub fn run_stages(cfg: &ExperimentConfig, stages: &[Stage]) -> Result<RunReport> {
    cfg.validate()?;
    let mut wanted: Vec<Stage> = Vec::new();
    let mut stack: Vec<Stage> = stages.to_vec();
    while let Some(s) = stack.pop() {
        if !wanted.contains(&s) {
            wanted.push(s);
            stack.extend_from_slice(s.dependencies());
        }
    }
    wanted.sort();
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut ctx = Context {
        cfg,
        field: cfg.operator.build()?,
        x: cfg.anchor_x(),
        out: out.clone(),
        cert: None,
        ws: Vec::new(),
        slice: None,
        zeta_unreliable: false,
        warnings: Vec::new(),
    };
    let mut reports: Vec<StageReport> = Vec::new();
    for stage in wanted {
        let blocked = stage.dependencies().iter().find(|d| {
            reports
                .iter()
                .find(|r| r.stage == **d)
                .is_none_or(|r| r.status != StageStatus::Pass)
        });
        let start = Instant::now();
        let outcome = if let Some(dep) = blocked {
            Outcome {
                status: StageStatus::Skipped,
                messages: vec![format!("skipped: stage {dep:?} did not pass")],
                details: Value::Null,
            }
        } else {
            let res = match stage {
                Stage::Certify => certify(&mut ctx),
                Stage::Solve => solve(&mut ctx),
                Stage::Moments => moments(&mut ctx),
                Stage::Bounds => bounds(&mut ctx),
                Stage::Approx => approximation(&mut ctx),
            };
            res.unwrap_or_else(|e| Outcome {
                status: StageStatus::Error,
                messages: vec![e.to_string()],
                details: Value::Null,
            })
        };
        for m in &outcome.messages {
            log::info!("{stage:?}: {m}");
        }
        reports.push(StageReport {
            stage,
            status: outcome.status,
            messages: outcome.messages,
            wall_seconds: start.elapsed().as_secs_f64(),
            details: outcome.details,
        });
    }
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        name: cfg.name.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        output: out.clone(),
        exit_code: exit_code(&reports),
        stages: reports,
        warnings: ctx.warnings,
    };
    write_text(
        &out.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

fn certificate_samples(cfg: &ExperimentConfig, field: &CoefficientField) -> SampleSet {
    let c = &cfg.certificate;
    let n_s = if field.is_autonomous() { 1 } else { 17 };
    SampleSet::tensor(field.dim(), 0.0, cfg.window.t, n_s, c.m_radius, c.m_nodes)
}

fn check_samples(cfg: &ExperimentConfig) -> SampleSet {
    let g = &cfg.check_grid;
    SampleSet::standard(cfg.dim(), (0.0, g.s_max), g.n_s, g.radius, g.n_x, cfg.seed)
}

fn base_certificate(cfg: &ExperimentConfig) -> Result<StaticCertificate> {
    let cert = StaticCertificate::new(
        cfg.dim(),
        cfg.certificate.delta,
        cfg.certificate_beta()?,
        CertificateTarget::WithPotential,
    )?;
    match cfg.certificate.bound {
        Some(m) => cert.with_bound(m),
        None => Ok(cert),
    }
}

fn w_parameters(cfg: &ExperimentConfig, i: usize) -> Result<WParameters> {
    let w = &cfg.lyapunov[i];
    let (m, p, r) = cfg
        .operator
        .exponents()
        .ok_or_else(|| Error::invalid("time-dependent functions need operator exponents"))?;
    Ok(WParameters {
        m,
        p,
        r,
        dim: cfg.dim(),
        case: cfg.w_case(w)?,
        eps: w.eps,
        delta: cfg.certificate.delta,
        alpha: w.alpha,
        t: cfg.window.t,
    })
}

fn certify(ctx: &mut Context<'_>) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let cert = base_certificate(cfg)?;
    let stat = check_static_certificate(&ctx.field, &cert, &certificate_samples(cfg, &ctx.field))?;
    let mut messages = stat.notes.clone();
    let mut pass = stat.pass;
    let m = stat.bound_m.unwrap_or(f64::INFINITY);
    if m.is_finite() {
        ctx.cert = Some(match cert.bound() {
            Some(_) => cert,
            None => cert.with_bound(m)?,
        });
    }
    let samples = check_samples(cfg);
    let mut td = Vec::new();
    for i in 0..cfg.lyapunov.len() {
        let params = w_parameters(cfg, i)?;
        if let Err(e) = params.validate() {
            pass = false;
            messages.push(format!("W #{i}: {e}"));
            td.push(json!({ "eps": params.eps, "alpha": params.alpha, "error": e.to_string() }));
            continue;
        }
        let w = build_time_dependent_w(params)?;
        let rep = check_time_dependent(&ctx.field, &w, &samples)?;
        if !rep.pass {
            pass = false;
            messages.push(format!(
                "W #{i} (eps = {}, alpha = {}): worst margin {:.3e} at {:?}",
                params.eps, params.alpha, rep.worst_margin, rep.argmin
            ));
        }
        td.push(json!({
            "eps": params.eps,
            "alpha": params.alpha,
            "case": params.case,
            "rate": w.rate(),
            "report": rep,
        }));
        ctx.ws.push(w);
    }
    let details = json!({
        "delta": cfg.certificate.delta,
        "beta": cfg.certificate_beta()?,
        "bound_m": m,
        "static": stat,
        "time_dependent": td,
    });
    Ok(Outcome::new(pass, messages, details))
}

/// Box radius from the configuration or from the tightness bound, with the
/// raw value and whether the floor `max(2, |x|+1)` was applied.
fn box_radius(
    cfg: &ExperimentConfig,
    cert: &StaticCertificate,
    x: &[f64],
) -> Result<(f64, f64, bool)> {
    if let Some(r) = cfg.solver.radius {
        return Ok((r, r, false));
    }
    let m = cert
        .bound()
        .ok_or_else(|| Error::invalid("the truncation radius needs the certificate bound M"))?;
    let raw = truncation_radius_unclamped(cert, x, m, cfg.solver.target_defect)?;
    let floor = truncation_floor(x);
    Ok((raw.max(floor), raw, raw < floor))
}

fn solve(ctx: &mut Context<'_>) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let cert = ctx
        .cert
        .as_ref()
        .ok_or_else(|| Error::invalid("no certificate bound available"))?;
    let (radius, raw, clamped) = box_radius(cfg, cert, &ctx.x)?;
    let mut messages = Vec::new();
    if clamped {
        let msg = format!(
            "truncation radius clamped from {raw:.4} to {radius:.4}; zeta checks flagged unreliable"
        );
        ctx.warnings.push(msg.clone());
        messages.push(msg);
        ctx.zeta_unreliable = true;
    }
    let s = &cfg.solver;
    let grid = SpaceTimeGrid::new(cfg.dim(), radius, s.nodes, 0.0, cfg.window.t, s.steps)?;
    let (g, g0) = solve_kernel_pair(&ctx.field, cfg.window.t, &ctx.x, &s.scheme, &grid)?;
    ctx.warnings.extend(g.warnings.iter().cloned());
    let max_mass = g.masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_mass = g.masses.iter().copied().fold(f64::INFINITY, f64::min);
    let excess = (&g.values - &g0.values)
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let sub_markov = max_mass <= 1.0 + 1e-6;
    let dominated = excess <= 1e-6;
    if !sub_markov {
        messages.push(format!("mass reaches {max_mass}, above 1 + 1e-6"));
    }
    if !dominated {
        messages.push(format!("g exceeds g0 by {excess:.3e}"));
    }
    g.write(
        &ctx.out.join("kernel_slice_raw.csv"),
        &ctx.out.join("kernel_slice_raw.json"),
        1,
    )?;
    let details = json!({
        "radius": radius,
        "radius_raw": raw,
        "clamped": clamped,
        "grid": grid,
        "theta": g.theta,
        "scheme": g.scheme,
        "sigma_delta": g.sigma_delta,
        "defect": g.defect,
        "min_mass": min_mass,
        "max_mass": max_mass,
        "min_raw": g.min_raw,
        "max_peclet": g.max_peclet,
        "domination_excess": excess,
        "sub_markov": sub_markov,
        "dominated": dominated,
        "warnings": g.warnings,
    });
    ctx.slice = Some(g);
    Ok(Outcome::new(sub_markov && dominated, messages, details))
}

fn moments(ctx: &mut Context<'_>) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let slice = ctx
        .slice
        .as_ref()
        .ok_or_else(|| Error::invalid("no kernel slice"))?;
    let cert = ctx
        .cert
        .as_ref()
        .ok_or_else(|| Error::invalid("no certificate bound available"))?;
    let k = cfg.bound_k();
    let gamma = compute_gamma_moments(slice, &ctx.field, k, &cfg.window)?;
    let mut pass = true;
    let mut messages = Vec::new();
    let mut zetas = Vec::new();
    for w in &ctx.ws {
        let prof = compute_zeta(slice, w, &cfg.window)?;
        let rep = check_zeta_bound(&prof, w, 0.02);
        if !rep.pass {
            pass = false;
            messages.push(format!(
                "zeta bound (eps = {}, alpha = {}): max ratio {:.4} at s = {:.4}, min Phi increment {:.3e}",
                w.eps(),
                w.alpha(),
                rep.max_ratio,
                rep.argmax_s,
                rep.phi_min_increment
            ));
        }
        zetas.push(json!({ "profile": prof, "report": rep }));
    }
    let mass = check_mass_bound(slice, cert, 0.02)?;
    if !mass.pass {
        pass = false;
        messages.push(format!(
            "mass bound: max ratio {:.4} at s = {:.4}",
            mass.max_ratio, mass.argmax_s
        ));
    }
    if ctx.zeta_unreliable {
        messages.push("zeta checks flagged unreliable: the truncation radius was clamped".into());
    }
    let details = json!({
        "k": k,
        "gamma": gamma,
        "zeta": zetas,
        "mass": mass,
        "reliable": !ctx.zeta_unreliable,
    });
    Ok(Outcome::new(pass, messages, details))
}

fn bounds(ctx: &mut Context<'_>) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let Some(spec) = cfg.bound.as_ref() else {
        return Ok(Outcome {
            status: StageStatus::Skipped,
            messages: vec!["no bound section configured".into()],
            details: Value::Null,
        });
    };
    let slice = ctx
        .slice
        .as_ref()
        .ok_or_else(|| Error::invalid("no kernel slice"))?;
    let (m, p, r) = cfg.operator.exponents().expect("validated");
    let sel = cfg.regime().expect("validated")?;
    let k = cfg.bound_k();
    let win = cfg.window;
    let refined_grid = slice.grid.refined(cfg.refine)?;
    let refined = solve_kernel_slice(&ctx.field, win.t, &ctx.x, &cfg.solver.scheme, &refined_grid)?;
    let verdict = verify_kernel_bound(slice, &refined, &sel, spec.alpha, spec.eps, k, &win)?;
    write_text(
        &ctx.out.join("verdict.json"),
        &serde_json::to_string_pretty(&verdict)?,
    )?;

    let ws = WeightSystem::new(
        cfg.dim(),
        k,
        spec.weights,
        cfg.certificate.delta,
        spec.alpha,
        sel.beta,
        win,
    )?;
    let radius = ws.verification_radius(m, p, r);
    let (ws, wrep) =
        compute_weight_constants(&ctx.field, m, p, r, &ws, &ws.verification_samples(radius))?;
    let zeta_j = |j: usize| -> Result<_> {
        let w = TimeDependentLyapunov::new(
            cfg.dim(),
            win.t,
            ws.eps[j],
            ws.alpha,
            ws.beta,
            RateFunction::zero(win.t),
        )?;
        compute_zeta(slice, &w, &win)
    };
    let (z1, z2) = (zeta_j(1)?, zeta_j(2)?);
    let (s1, i1, i2) = (z1.sup_window, z1.integral_window, z2.integral_window);
    let bounded = assemble_main_bound(&ws, s1, i1, i2, BoundVariant::Bounded);
    let general = assemble_main_bound(&ws, s1, i1, i2, BoundVariant::General);
    let remapped = remap_all(&ws.constants, ctx.field.eta());
    let bounded_remapped = main_bound_from_constants(
        &remapped,
        k,
        win.b0 - win.b,
        s1,
        i1,
        i2,
        BoundVariant::Bounded,
    );

    let sweep: Vec<Result<SweepRow>> = par::map_collect(&spec.sweep, |pt| {
        verify_kernel_bound(slice, &refined, &sel, pt.alpha, pt.eps, pt.k, &win)
            .map(|v| SweepRow::from(&v))
    });
    let sweep = sweep.into_iter().collect::<Result<Vec<_>>>()?;
    if !sweep.is_empty() {
        write_text(&ctx.out.join("sweep.csv"), &sweep_csv(&sweep))?;
    }

    let mut messages = Vec::new();
    if !verdict.stable {
        messages.push(format!(
            "C_fit changed by {:.1}% under refinement ({:.4e} -> {:.4e})",
            100.0 * verdict.relative_change,
            verdict.c_fit,
            verdict.c_fit_refined
        ));
    }
    if !wrep.ordering_pass {
        messages.push(format!(
            "weight ordering violated (margin {:.3e})",
            wrep.ordering_margin
        ));
    }
    let details = json!({
        "regime": sel,
        "verdict": verdict,
        "weights": ws,
        "weight_report": wrep,
        "main_bound": {
            "sup_zeta1": s1,
            "int_zeta1": i1,
            "int_zeta2": i2,
            "bounded": bounded,
            "general": general,
            "bounded_remapped": bounded_remapped,
        },
        "sweep": sweep,
    });
    Ok(Outcome::new(
        verdict.pass && wrep.ordering_pass,
        messages,
        details,
    ))
}

fn approximation(ctx: &mut Context<'_>) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let Some(spec) = cfg.approximation.as_ref() else {
        return Ok(Outcome {
            status: StageStatus::Skipped,
            messages: vec!["no approximation section configured".into()],
            details: Value::Null,
        });
    };
    let cert = match &ctx.cert {
        Some(c) => c.clone(),
        None => {
            let c = base_certificate(cfg)?;
            if c.bound().is_some() {
                c
            } else {
                let m = c.estimate_bound(&ctx.field, &certificate_samples(cfg, &ctx.field))?;
                c.with_bound(m)?
            }
        }
    };
    let (radius, _, _) = box_radius(cfg, &cert, &ctx.x)?;
    let s = &cfg.solver;
    let grid = SpaceTimeGrid::new(cfg.dim(), radius, s.nodes, 0.0, cfg.window.t, s.steps)?;
    let beta = spec.beta.unwrap_or(cert.beta());
    let w1 = TimeDependentLyapunov::new(
        cfg.dim(),
        cfg.window.t,
        spec.eps1,
        spec.alpha,
        beta,
        RateFunction::zero(cfg.window.t),
    )?;
    let profile = Arc::new(build_cutoff_profile(spec.mu)?);
    let levels = spec.levels();
    let sweep = convergence_sweep(
        &ctx.field,
        &levels,
        &w1,
        profile.clone(),
        &s.scheme,
        &grid,
        &ctx.x,
        &cfg.window,
    )?;
    write_text(&ctx.out.join("approx_sweep.csv"), &sweep.to_csv())?;

    let ws: Vec<TimeDependentLyapunov> = if ctx.ws.is_empty() {
        (0..cfg.lyapunov.len())
            .filter_map(|i| w_parameters(cfg, i).ok())
            .filter(|p| p.validate().is_ok())
            .map(build_time_dependent_w)
            .collect::<Result<_>>()?
    } else {
        ctx.ws.clone()
    };
    let samples = check_samples(cfg);
    let mut messages = Vec::new();
    let mut transfer_ok = true;
    let mut transfers = Vec::new();
    for &n in &levels {
        let op = build_truncated_operator(&ctx.field, n, &w1, profile.clone())?;
        let ell = check_ellipticity(op.field(), &samples.points)?;
        if !ell.pass {
            transfer_ok = false;
            messages.push(format!(
                "level {n:.4}: ellipticity fails (min margin {:.3e})",
                ell.min_margin
            ));
        }
        let mut margins = Vec::new();
        for w in &ws {
            let rep = check_time_dependent(op.field(), w, &samples)?;
            if !rep.pass {
                transfer_ok = false;
                messages.push(format!(
                    "level {n:.4}: W (eps = {}) fails with margin {:.3e}",
                    w.eps(),
                    rep.worst_margin
                ));
            }
            margins.push(json!({ "eps": w.eps(), "alpha": w.alpha(), "pass": rep.pass, "worst_margin": rep.worst_margin }));
        }
        transfers.push(json!({ "n": n, "ellipticity": ell.pass, "min_ellipticity_margin": ell.min_margin, "time_dependent": margins }));
    }
    let top = sweep
        .levels
        .last()
        .map(|l| l.relative_diff)
        .unwrap_or(f64::INFINITY);
    if !sweep.strictly_decreasing {
        messages.push("sup |g_n - g| is not strictly decreasing across levels".into());
    }
    if top > 0.05 {
        messages.push(format!(
            "relative difference {top:.3e} at the top level exceeds 5%"
        ));
    }
    let pass = sweep.strictly_decreasing && top <= 0.05 && transfer_ok;
    let details = json!({
        "radius": radius,
        "mu": spec.mu,
        "max_t_dphi": profile.max_t_derivative(),
        "sweep": sweep,
        "transfer": transfers,
    });
    Ok(Outcome::new(pass, messages, details))
}
