//! One function per subcommand. Each writes its artifacts into the output
//! directory and reports whether its verdict (if any) passed.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::f64::consts::PI;

use serde::Serialize;
use serde_json::{json, Value};

use weakclose_core::energy::minimize_i;
use weakclose_core::experiments::{
    affine_subsolution, divcurl_convergence, solve_laminate, verify_theorem1, write_divcurl_csv, ClosureContext,
    SequenceSpec,
};
use weakclose_core::fields::{write_field_csv, write_field_snapshot, FieldPair, ScalarField};
use weakclose_core::hulls::io::cache_path;
use weakclose_core::hulls::{
    cached_envelope, g_eval, g_lambda_upper, reconvexify, write_envelope_csv, write_sets_csv, z_interval, EnvelopeTable,
    SetKind, SetRow,
};
use weakclose_core::residual::lemma_bound_check;
use weakclose_core::{gamma_interval, monotone_set, FluxModel, IntervalSet, Window};

use crate::config::{ConfigError, ResidualCase, RunConfig};
use crate::svg::{padded_range, shade, Plot};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(&'static str, weakclose_core::Error),
    Io(PathBuf, io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(ctx, e) => write!(f, "{ctx}: {e}"),
            CliError::Io(p, e) => write!(f, "writing {}: {e}", p.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

trait Context<T> {
    fn ctx(self, what: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for weakclose_core::Result<T> {
    fn ctx(self, what: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Core(what, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    AnalyzeFlux,
    Convexify,
    Sets,
    Minimize,
    Laminate,
    #[value(name = "verify-thm1")]
    VerifyThm1,
    Divcurl,
    Residual,
}

/// `passed` is false when a verdict failed; errors are returned separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
        text.push('\n');
        fs::write(&p, text).map_err(|e| CliError::Io(p, e))
    }

    fn svg(&mut self, name: &str, plot: &Plot) -> Result<(), CliError> {
        let p = self.path(name);
        plot.write(&p).map_err(|e| CliError::Io(p, e))
    }

    fn done(self, passed: bool) -> Outcome {
        Outcome { passed, artifacts: self.written }
    }
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match &cfg.output {
        Some(o) => cfg.base_dir.join(o),
        None => PathBuf::from("out"),
    }
}

fn cache_dir(cfg: &RunConfig, out: &Path) -> PathBuf {
    match &cfg.cache_dir {
        Some(c) => cfg.base_dir.join(c),
        None => out.join("cache"),
    }
}

struct Setup {
    flux: FluxModel,
    wp: Window,
    wb: Window,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    Ok(Setup {
        flux: cfg.flux_model()?,
        wp: cfg.window_p.window().ctx("p window")?,
        wb: cfg.window_beta.window().ctx("beta window")?,
    })
}

fn envelope(cfg: &RunConfig, s: &Setup, out: &Path) -> Result<EnvelopeTable, CliError> {
    cached_envelope(cache_dir(cfg, out), &s.flux, &s.wp, &s.wb).ctx("convex envelope")
}

fn interval_json(set: &IntervalSet) -> Value {
    json!({
        "intervals": set.intervals,
        "truncated_lo": set.truncated_lo,
        "truncated_hi": set.truncated_hi,
    })
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = Out::new(output_dir(cfg))?;
    match cmd {
        Command::AnalyzeFlux => analyze_flux(cfg, out),
        Command::Convexify => convexify(cfg, out),
        Command::Sets => sets(cfg, out),
        Command::Minimize => minimize(cfg, out),
        Command::Laminate => laminate(cfg, out),
        Command::VerifyThm1 => verify_thm1(cfg, out),
        Command::Divcurl => divcurl(cfg, out),
        Command::Residual => residual(cfg, out),
    }
}

fn flux_plot(title: &str, flux: &FluxModel, wp: &Window, lambda: &IntervalSet) -> Plot {
    let pts: Vec<(f64, f64)> = wp.nodes().map(|p| (p, flux.eval_unchecked(p))).collect();
    let mut plot = Plot::new(title, "p", "sigma(p)", (wp.p_min, wp.p_max), padded_range(pts.iter().map(|q| q.1)));
    let h = wp.spacing();
    for &(lo, hi) in &lambda.intervals {
        plot.rect(lo - 0.5 * h, hi + 0.5 * h, f64::NEG_INFINITY, f64::INFINITY, "#7fbf7f", 0.35);
    }
    plot.polyline(&pts, "black", 1.5);
    plot.legend(0, "#7fbf7f", "monotone set");
    plot
}

fn analyze_flux(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let lambda = monotone_set(&s.flux, &s.wp);

    let path = out.path("flux.csv");
    let mut text = String::from("p,sigma,dsigma,in_lambda\n");
    for p in s.wp.nodes() {
        let sigma = s.flux.eval(p).ctx("flux evaluation")?;
        let member = lambda.contains(p, 0.5 * s.wp.spacing());
        text.push_str(&format!("{p},{sigma},{},{member}\n", s.flux.derivative(p)));
    }
    fs::write(&path, text).map_err(|e| CliError::Io(path, e))?;

    let p = out.path("sets.csv");
    write_sets_csv(&SetRow::rows(None, SetKind::Lambda, &lambda), p).ctx("sets.csv")?;
    out.json(
        "report.json",
        &json!({
            "flux": cfg.flux,
            "h_p": s.wp.spacing(),
            "growth_c1": s.flux.growth_c1(),
            "lambda": interval_json(&lambda),
        }),
    )?;
    out.svg("flux.svg", &flux_plot("flux and monotone set", &s.flux, &s.wp, &lambda))?;
    Ok(out.done(true))
}

fn convexify(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let env = envelope(cfg, &s, &out.dir)?;
    out.written.push(cache_path(cache_dir(cfg, &out.dir), &s.flux, &s.wp, &s.wb));
    let p = out.path("envelope.csv");
    write_envelope_csv(&env, p).ctx("envelope.csv")?;

    let again = reconvexify(&env);
    let idem = env.values.iter().zip(again.values.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / env.meta.max_f.max(f64::MIN_POSITIVE);
    let tol = cfg.zero_tol.unwrap_or(env.default_zero_tol());
    out.json(
        "report.json",
        &json!({
            "fingerprint": env.meta.fingerprint,
            "h_p": env.meta.h_p,
            "h_beta": env.meta.h_beta,
            "max_f": env.meta.max_f,
            "zero_tol": tol,
            "boundary_fraction": env.boundary_fraction(),
            "idempotence_rel": idem,
        }),
    )?;
    out.svg("envelope.svg", &envelope_plot(&env, tol)?)?;
    Ok(out.done(true))
}

fn envelope_plot(env: &EnvelopeTable, tol: f64) -> Result<Plot, CliError> {
    let (np, nb) = env.values.dim();
    let mut plot = Plot::new("convex envelope and zero-set boundary", "p", "beta", env.p_range(), env.beta_range());
    let stride = |n: usize| n.div_ceil(64).max(1);
    let (sp, sb) = (stride(np), stride(nb));
    let top = env.meta.max_f.max(f64::MIN_POSITIVE).sqrt();
    for i in (0..np).step_by(sp) {
        for k in (0..nb).step_by(sb) {
            let x1 = env.p_axis[(i + sp).min(np - 1)];
            let y1 = env.beta_axis[(k + sb).min(nb - 1)];
            plot.rect(env.p_axis[i], x1, env.beta_axis[k], y1, &shade(env.values[[i, k]].sqrt() / top), 1.0);
        }
    }
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for &p in &env.p_axis {
        if let Some((a, b)) = z_interval(env, p, tol).ctx("zero set")?.bounds() {
            lo.push((p, a));
            hi.push((p, b));
        }
    }
    plot.polyline(&lo, "red", 1.5);
    plot.polyline(&hi, "red", 1.5);
    plot.legend(0, "red", "zero-set boundary");
    Ok(plot)
}

fn sets(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let env = envelope(cfg, &s, &out.dir)?;
    let lambda = monotone_set(&s.flux, &s.wp);
    let tol = cfg.zero_tol.unwrap_or(env.default_zero_tol());
    let ps: Vec<f64> = match &cfg.sets.p_values {
        Some(v) => v.clone(),
        None => s.wp.nodes().collect(),
    };
    let mut rows = SetRow::rows(None, SetKind::Lambda, &lambda);
    let mut sigmas = Vec::with_capacity(ps.len());
    for &p in &ps {
        let gamma = gamma_interval(&s.flux, &lambda, p, env.beta_range());
        let z = z_interval(&env, p, tol).ctx("zero set")?;
        let sigma = gamma.intersect(&z);
        rows.extend(SetRow::rows(Some(p), SetKind::Gamma, &gamma));
        rows.extend(SetRow::rows(Some(p), SetKind::Z, &z));
        rows.extend(SetRow::rows(Some(p), SetKind::Sigma, &sigma));
        sigmas.push((p, sigma));
    }
    let path = out.path("sets.csv");
    write_sets_csv(&rows, path).ctx("sets.csv")?;
    out.json(
        "report.json",
        &json!({
            "zero_tol": tol,
            "lambda": interval_json(&lambda),
            "p_values": ps.len(),
        }),
    )?;
    out.svg("sets.svg", &sets_plot(&s, &env, &lambda, &sigmas))?;
    Ok(out.done(true))
}

/// Σ(p) columns over the flux graph, with the corners of the nondegenerate
/// region labelled A (bottom left), B (bottom right), C (top right),
/// E (top left).
fn sets_plot(s: &Setup, env: &EnvelopeTable, lambda: &IntervalSet, sigmas: &[(f64, IntervalSet)]) -> Plot {
    let (b0, b1) = env.beta_range();
    let mut plot = Plot::new("weak-closure sets", "p", "beta", (s.wp.p_min, s.wp.p_max), (b0, b1));
    let h = s.wp.spacing();
    for &(lo, hi) in &lambda.intervals {
        plot.rect(lo - 0.5 * h, hi + 0.5 * h, b0, b1, "#7fbf7f", 0.35);
    }
    let wide: Vec<(f64, f64, f64)> = sigmas
        .iter()
        .filter_map(|(p, set)| set.bounds().map(|(lo, hi)| (*p, lo, hi)))
        .filter(|&(_, lo, hi)| hi - lo > 2.0 * env.meta.h_beta)
        .collect();
    for &(p, lo, hi) in &wide {
        plot.rect(p - 0.5 * h, p + 0.5 * h, lo, hi, "#e6a040", 0.6);
    }
    let graph: Vec<(f64, f64)> = s.wp.nodes().map(|p| (p, s.flux.eval_unchecked(p))).collect();
    plot.polyline(&graph, "black", 1.5);
    if let (Some(&first), Some(&last)) = (wide.first(), wide.last()) {
        if (last.0 - first.0).abs() < 1.5 * h {
            plot.point(first.0, first.1, "black", Some("A"));
            plot.point(first.0, first.2, "black", Some("B"));
        } else {
            plot.point(first.0, first.1, "black", Some("A"));
            plot.point(last.0, last.1, "black", Some("B"));
            plot.point(last.0, last.2, "black", Some("C"));
            plot.point(first.0, first.2, "black", Some("E"));
        }
    }
    plot.legend(0, "#7fbf7f", "monotone set");
    plot.legend(1, "#e6a040", "closure set");
    plot
}

fn write_pair(out: &mut Out, w: &FieldPair) -> Result<(), CliError> {
    write_field_csv(&w.u, out.path("u.csv")).ctx("u.csv")?;
    write_field_csv(&w.v, out.path("v.csv")).ctx("v.csv")?;
    write_field_snapshot(&w.u, out.path("u.snap")).ctx("u.snap")?;
    write_field_snapshot(&w.v, out.path("v.snap")).ctx("v.snap")
}

fn minimize(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let flux = cfg.flux_model()?;
    let grid = cfg.grid.grid().ctx("grid")?;
    let a = cfg.minimize.anchor;
    let (anchor, anchor_report) = affine_subsolution(a.p, a.beta, grid);
    let traj = minimize_i(&anchor, &flux, &cfg.minimize_options()).ctx("minimizer")?;
    traj.write_csv(out.path("trajectory.csv")).ctx("trajectory.csv")?;
    write_pair(&mut out, &traj.terminal)?;

    let dist = ScalarField::new(grid, &traj.terminal.u.values - &anchor.u.values).ctx("distance")?.l2_norm();
    out.json(
        "report.json",
        &json!({
            "anchor": {"p": a.p, "beta": a.beta, "div_defect": anchor_report.div_defect},
            "volume": grid.volume(),
            "initial_I": traj.initial().i_total,
            "final_I": traj.last().i_total,
            "accepted_steps": traj.accepted_steps(),
            "stop": traj.stop,
            "u_distance_l2": dist,
            "warnings": traj.warnings,
        }),
    )?;

    let pts: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.iter as f64, r.i_total.max(1e-300).log10())).collect();
    let mut plot = Plot::new(
        "descent",
        "iteration",
        "log10 I",
        padded_range(pts.iter().map(|q| q.0)),
        padded_range(pts.iter().map(|q| q.1)),
    );
    plot.polyline(&pts, "navy", 1.5);
    out.svg("descent.svg", &plot)?;
    Ok(out.done(true))
}

fn laminate(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let e = &cfg.experiment;
    let cert = solve_laminate(&s.flux, e.p, e.beta, e.bracket);
    let (g_lambda, lam_cert) = g_lambda_upper(&s.flux, e.p, e.beta, e.lambda, e.search()).ctx("laminate search")?;
    let passed = cert.is_ok();
    out.json(
        "laminate.json",
        &json!({
            "p": e.p,
            "beta": e.beta,
            "bracket": e.bracket,
            "certificate": cert.as_ref().ok(),
            "error": cert.as_ref().err().map(|e| e.to_string()),
            "g_lambda": {"lambda": e.lambda, "value": g_lambda, "certificate": lam_cert},
        }),
    )?;

    let lambda = monotone_set(&s.flux, &s.wp);
    let mut plot = flux_plot("two-slope laminate", &s.flux, &s.wp, &lambda);
    if let Ok(c) = &cert {
        let (fa, fb) = (s.flux.eval_unchecked(c.a), s.flux.eval_unchecked(c.b));
        plot.segment((c.a, fa), (c.b, fb), "#d04020", 1.0);
        plot.point(c.a, fa, "#d04020", Some("a"));
        plot.point(c.b, fb, "#d04020", Some("b"));
    }
    plot.point(e.p, e.beta, "navy", Some("target"));
    out.svg("laminate.svg", &plot)?;
    Ok(out.done(passed))
}

fn sequence(cfg: &RunConfig, flux: &FluxModel) -> Result<SequenceSpec, CliError> {
    let e = &cfg.experiment;
    Ok(SequenceSpec {
        p: e.p,
        beta: e.beta,
        laminate: solve_laminate(flux, e.p, e.beta, e.bracket).ctx("laminate")?,
        grid: cfg.grid.grid().ctx("grid")?,
    })
}

fn verify_thm1(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let e = &cfg.experiment;
    let env = envelope(cfg, &s, &out.dir)?;
    let lambda = monotone_set(&s.flux, &s.wp);
    let spec = sequence(cfg, &s.flux)?;
    let ctx = ClosureContext {
        flux: &s.flux,
        env: &env,
        lambda_set: &lambda,
        claimed_sigma_bar: e.claimed_sigma_bar,
        margin_tol: e.margin_tol,
    };
    let report = verify_theorem1(&spec, &e.js, &ctx, cfg.residual.cg_tol).ctx("closure verdict")?;
    report.verdict.write_csv(out.path("verdict.csv")).ctx("verdict.csv")?;

    let path = out.path("residuals.csv");
    let mut text = String::from("j,residual_hm1\n");
    for r in &report.residuals {
        text.push_str(&format!("{},{}\n", r.j, r.residual_hm1));
    }
    fs::write(&path, text).map_err(|e| CliError::Io(path, e))?;

    let closure_ok = report.verdict.interior_blocks > 0 && report.verdict.pass_fraction >= e.min_pass_fraction;
    let residual_ok = !e.require_residual_decrease || report.residual_decreasing;
    out.json(
        "report.json",
        &json!({
            "laminate": spec.laminate,
            "g_at_target": g_eval(&env, e.p, e.beta).ok(),
            "claimed_sigma_bar": e.claimed_sigma_bar,
            "pass_fraction": report.verdict.pass_fraction,
            "interior_blocks": report.verdict.interior_blocks,
            "residuals": report.residuals,
            "residual_decreasing": report.residual_decreasing,
            "closure_passed": closure_ok,
            "residual_passed": residual_ok,
        }),
    )?;

    let pts: Vec<(f64, f64)> = report.residuals.iter().map(|r| (r.j as f64, r.residual_hm1)).collect();
    let mut plot = Plot::new(
        "residual of the laminate sequence",
        "j",
        "H^-1 residual",
        padded_range(pts.iter().map(|q| q.0)),
        padded_range(pts.iter().map(|q| q.1).chain([0.0])),
    );
    plot.polyline(&pts, "navy", 1.5);
    for &(j, r) in &pts {
        plot.point(j, r, "navy", None);
    }
    out.svg("residuals.svg", &plot)?;
    Ok(out.done(closure_ok && residual_ok))
}

fn divcurl(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let flux = cfg.flux_model()?;
    let e = &cfg.experiment;
    let spec = sequence(cfg, &flux)?;
    let phi = e.test_function(&spec.grid);
    let rows = divcurl_convergence(&spec, &flux, &e.js, &phi).ctx("div-curl check")?;
    write_divcurl_csv(&rows, out.path("divcurl.csv")).ctx("divcurl.csv")?;
    let decreasing = rows.windows(2).all(|w| w[1].abs_diff < w[0].abs_diff);
    let final_diff = rows.last().map_or(f64::NAN, |r| r.abs_diff);
    let passed = decreasing && final_diff <= e.divcurl_tol;
    out.json(
        "report.json",
        &json!({
            "rows": rows,
            "decreasing": decreasing,
            "final_abs_diff": final_diff,
            "tolerance": e.divcurl_tol,
            "passed": passed,
        }),
    )?;

    let a: Vec<(f64, f64)> = rows.iter().map(|r| (r.j as f64, r.abs_diff)).collect();
    let b: Vec<(f64, f64)> = rows.iter().map(|r| (r.j as f64, r.oracle_diff)).collect();
    let mut plot = Plot::new(
        "product of weakly converging fields",
        "j",
        "difference",
        padded_range(a.iter().map(|q| q.0)),
        padded_range(a.iter().chain(&b).map(|q| q.1).chain([0.0])),
    );
    plot.polyline(&a, "navy", 1.5);
    plot.polyline(&b, "#d04020", 1.5);
    plot.legend(0, "navy", "vs block limits");
    plot.legend(1, "#d04020", "vs periodic mean");
    out.svg("divcurl.svg", &plot)?;
    Ok(out.done(passed))
}

/// `u = e^{-aπ²t} sin πx`, `v = -e^{-aπ²t} cos(πx) / π` solve the linear heat
/// system exactly for `σ(p) = a·p`.
fn heat_pair(cfg: &RunConfig, flux: &FluxModel) -> Result<FieldPair, CliError> {
    let grid = cfg.grid.grid().ctx("grid")?;
    let a = match flux.kind() {
        weakclose_core::FluxKind::Linear { slope } => *slope,
        _ => return Err(CliError::Config(ConfigError::Invalid("the heat case needs a linear flux".into()))),
    };
    let k = PI / grid.l;
    let u = ScalarField::from_fn(grid, |x, t| (-a * k * k * t).exp() * (k * x).sin());
    let v = ScalarField::from_fn(grid, |x, t| -(-a * k * k * t).exp() * (k * x).cos() / k);
    FieldPair::new(u, v).ctx("heat pair")
}

fn residual(cfg: &RunConfig, mut out: Out) -> Result<Outcome, CliError> {
    let flux = cfg.flux_model()?;
    let pair = match cfg.residual.case {
        ResidualCase::Heat => heat_pair(cfg, &flux)?,
        ResidualCase::Anchor => {
            let a = cfg.minimize.anchor;
            affine_subsolution(a.p, a.beta, cfg.grid.grid().ctx("grid")?).0
        }
        ResidualCase::Minimizer => {
            let a = cfg.minimize.anchor;
            let (anchor, _) = affine_subsolution(a.p, a.beta, cfg.grid.grid().ctx("grid")?);
            minimize_i(&anchor, &flux, &cfg.minimize_options()).ctx("minimizer")?.terminal
        }
    };
    let r = lemma_bound_check(&pair, &flux, cfg.residual.cg_tol).ctx("residual")?;
    out.json(
        "report.json",
        &json!({
            "residual_hm1": r.residual_hm1,
            "sqrt_I": r.sqrt_i,
            "slack": r.slack,
            "cg_iters": r.cg_iters,
            "cg_tol": r.cg_tol,
            "violated": r.violated,
        }),
    )?;
    let mut plot = Plot::new("residual against energy", "", "value", (0.0, 3.0), padded_range([0.0, r.residual_hm1, r.sqrt_i]));
    plot.rect(0.5, 1.3, 0.0, r.residual_hm1, "navy", 0.8);
    plot.rect(1.7, 2.5, 0.0, r.sqrt_i, "#d04020", 0.8);
    plot.legend(0, "navy", "H^-1 residual");
    plot.legend(1, "#d04020", "sqrt I");
    out.svg("residual.svg", &plot)?;
    Ok(out.done(!r.violated))
}
