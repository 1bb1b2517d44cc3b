//! The four commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ahcc_core::constraint::{make_source, ConstraintState, SourceProfile, SourceTensor};
use ahcc_core::curvature::MetricField;
use ahcc_core::operators::OperatorContext;
use ahcc_core::sample::{FieldSampler, Support};
use ahcc_core::solver::{solve, LinearizedOperator, SolveReport};
use ahcc_core::verify::*;
use ahcc_core::{BackgroundGeometry, FieldGrid, OneFormField, Repr, ScalarField, SymTensor2Field};
use chrono::Utc;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::fieldio::{read_field, write_field};
use crate::report::{create_run_dir, profile_csv, residual_csv, ReportDoc};

pub const HBAR_FILE: &str = "hbar.ahcf";
pub const XIBAR_FILE: &str = "xibar.ahcf";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Background,
    Solve,
    Verify,
    Lincheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Background => "background",
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Lincheck => "lincheck",
        }
    }
}

/// Where a finished command left its artifacts.
#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub report: ReportDoc,
}

/// Partial results of a failed solve, written before the error surfaces.
#[derive(Debug)]
pub struct Failure {
    pub dir: Option<PathBuf>,
    pub error: CliError,
}

impl From<CliError> for Failure {
    fn from(error: CliError) -> Self {
        Failure { dir: None, error }
    }
}

/// Validates `cfg`, runs `cmd` and writes its report under `out`.
pub fn run(cmd: Command, cfg: RunConfig, out: &Path, state: Option<&Path>) -> Result<Outcome, Failure> {
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let grid = cfg.build_grid()?;
    let bg = cfg.background()?;
    let now = Utc::now();
    let dir = create_run_dir(out, cmd.name(), now)?;
    let mut report = ReportDoc::new(cfg, now);
    let result = match cmd {
        Command::Background => background(&grid, &bg, &dir, &mut report),
        Command::Solve => solve_cmd(&grid, &bg, &dir, &mut report),
        Command::Verify => verify_cmd(&grid, &bg, &dir, &mut report, state),
        Command::Lincheck => lincheck(&grid, &bg, &mut report),
    };
    let report_path = dir.join(REPORT_FILE);
    report.files.insert("report".into(), report_path.clone());
    let written = report.write(&report_path);
    match (result, written) {
        (Err(error), _) | (Ok(()), Err(error)) => Err(Failure { dir: Some(dir), error }),
        (Ok(()), Ok(())) => Ok(Outcome { dir, report }),
    }
}

fn save<K: ahcc_core::field::FieldKind>(
    report: &mut ReportDoc,
    dir: &Path,
    name: &str,
    file: &str,
    grid: &FieldGrid,
    field: &ahcc_core::Field<K>,
) -> Result<(), CliError> {
    let path = dir.join(file);
    write_field(&path, grid, field)?;
    report.files.insert(name.into(), path);
    Ok(())
}

fn save_text(report: &mut ReportDoc, dir: &Path, name: &str, file: &str, text: String) -> Result<(), CliError> {
    let path = dir.join(file);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    report.files.insert(name.into(), path);
    Ok(())
}

/// Unit vectors from the nonzero points of `{-1, 0, 1}^n`.
fn sphere_samples(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let d = (c % 3) as f64 - 1.0;
                c /= 3;
                d
            })
            .collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.0 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// `|dρ|` in the compactified metric: finite differences against `|x|`
/// inside, and the value 1 on the unit sphere.
fn d_rho_checks(grid: &FieldGrid, bg: &BackgroundGeometry) -> Result<[CheckResult; 2], CliError> {
    let n = grid.dim();
    let rho = ScalarField::from_fn(grid, Repr::Physical, |x, out| out[0] = bg.rho_at(x));
    let grad = grid.gradient(rho.data(), 1, 0)?;
    let mut inside = 0.0f64;
    for &p in grid.interior_nodes() {
        let p = p as usize;
        let g = &grad[p * n..(p + 1) * n];
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x = grid.coords(p);
        inside = inside.max((norm - bg.d_rho_norm_compact(&x[..n])).abs());
    }
    let boundary = sphere_samples(n)
        .iter()
        .map(|u| (bg.d_rho_norm_compact(u) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok([
        CheckResult::at_most("d_rho_interior", inside, 1e-10, "interior"),
        CheckResult::at_most("d_rho_boundary", boundary, 1e-12, "unit sphere samples"),
    ])
}

fn background(grid: &FieldGrid, bg: &BackgroundGeometry, dir: &Path, report: &mut ReportDoc) -> Result<(), CliError> {
    let ctx = OperatorContext::background(grid, bg)?;
    let mut summary = VerificationSummary::new();
    summary.push(check_constant_scalar(&ctx, 1e-4)?);
    summary.push(check_einstein(&ctx, bg, 1e-4)?);
    summary.push(check_gauge(&ctx, bg, 0.0, 1e-5)?);
    summary.push(check_bianchi(&ctx, bg, 1e-4)?);
    for c in d_rho_checks(grid, bg)? {
        summary.push(c);
    }
    let trials = report.config.verify.probe_trials;
    let q = nondegeneracy_probe(&ctx, bg, trials, report.config.seed)?;
    summary.push(CheckResult::positive("nondegeneracy", q, "core"));
    report.verification = Some(summary);
    let g0 = MetricField::background(grid, bg);
    save(report, dir, "g0", "g0.ahcf", grid, g0.comps())
}

/// Battery plus identity checks on a state; shared by `solve` and `verify`
/// so their values agree.
fn state_verification(
    cfg: &RunConfig,
    ctx0: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    state: &ConstraintState,
    t: &SourceTensor,
) -> Result<(VerificationSummary, Option<DecayFit>), CliError> {
    let grid = ctx0.grid();
    let v = &cfg.verify;
    let mut summary = battery(state, t, bg, grid, &v.tolerances)?;
    let ctx = OperatorContext::without_riemann(grid, state.metric(grid, bg)?)?;
    summary.push(check_bianchi(&ctx, bg, v.bianchi_tol)?);
    let w: OneFormField = FieldSampler::new(cfg.seed).physical(grid, bg, Support::Everywhere)?;
    summary.push(check_gauge_identity(ctx0, bg, &w, v.gauge_identity_tol)?);
    let q = nondegeneracy_probe(ctx0, bg, v.probe_trials, cfg.seed)?;
    summary.push(CheckResult::positive("nondegeneracy", q, "core"));
    let (h, _) = state.physical(grid, bg)?;
    let fit = match decay_fit(&h, grid, bg, 0.5) {
        Ok(fit) => Some(fit),
        Err(ahcc_core::Error::Fit(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((summary, fit))
}

fn solve_cmd(grid: &FieldGrid, bg: &BackgroundGeometry, dir: &Path, report: &mut ReportDoc) -> Result<(), CliError> {
    let cfg = report.config.clone();
    let start = Instant::now();
    let op = LinearizedOperator::new(grid, bg)?;
    let t = make_source(&cfg.source, grid, bg)?;
    eprintln!("solving on N = {} with {}", grid.points_per_axis(), cfg.solver.mode.name());
    let (state, mut sr) = match solve(&op, &t, &cfg.solver) {
        Ok(r) => r,
        Err(e) => {
            if let ahcc_core::Error::Diverged { iterations, history, .. }
            | ahcc_core::Error::NotConverged { iterations, history, .. } = &e
            {
                let partial = SolveReport {
                    mode: cfg.solver.mode.name().into(),
                    iterations: *iterations,
                    residual_history: history.to_vec(),
                    wall_time_s: Some(start.elapsed().as_secs_f64()),
                    ..Default::default()
                };
                save_text(report, dir, "residual_history", "residual_history.csv", residual_csv(&partial))?;
                report.solve = Some(partial);
            }
            return Err(e.into());
        }
    };
    save(report, dir, "hbar", HBAR_FILE, grid, &state.hbar)?;
    save(report, dir, "xibar", XIBAR_FILE, grid, &state.xibar)?;
    let (summary, fit) = state_verification(&cfg, op.context(), bg, &state, &t)?;
    sr.verification = Some(summary.clone());
    sr.wall_time_s = Some(start.elapsed().as_secs_f64());
    save_text(report, dir, "residual_history", "residual_history.csv", residual_csv(&sr))?;
    if let Some(fit) = fit {
        save_text(report, dir, "radial_profile", "radial_profile.csv", profile_csv(&fit.profile))?;
    }
    report.solve = Some(sr);
    report.verification = Some(summary);
    Ok(())
}

/// Loads `hbar.ahcf` and `xibar.ahcf` from `dir`, checking them against the
/// configured grid.
pub fn load_state(dir: &Path, grid: &FieldGrid) -> Result<ConstraintState, CliError> {
    let hbar: SymTensor2Field = read_field(&dir.join(HBAR_FILE), grid, Repr::Rescaled)?;
    let xibar: OneFormField = read_field(&dir.join(XIBAR_FILE), grid, Repr::Rescaled)?;
    let state = ConstraintState { hbar, xibar };
    state.validate(grid)?;
    Ok(state)
}

fn verify_cmd(
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    dir: &Path,
    report: &mut ReportDoc,
    state_dir: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = report.config.clone();
    let state_dir = state_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.verify.state.clone())
        .ok_or_else(|| CliError::Validation("verify.state: a state directory is required".into()))?;
    let state = load_state(&state_dir, grid)?;
    report.files.insert("hbar".into(), state_dir.join(HBAR_FILE));
    report.files.insert("xibar".into(), state_dir.join(XIBAR_FILE));
    let t = make_source(&cfg.source, grid, bg)?;
    let ctx0 = OperatorContext::background(grid, bg)?;
    let (summary, fit) = state_verification(&cfg, &ctx0, bg, &state, &t)?;
    if let Some(fit) = fit {
        save_text(report, dir, "radial_profile", "radial_profile.csv", profile_csv(&fit.profile))?;
    }
    if cfg.source.profile != SourceProfile::RhoPower {
        eprintln!("note: decay check only applies to rho-power sources");
    }
    report.verification = Some(summary);
    Ok(())
}

fn lincheck(grid: &FieldGrid, bg: &BackgroundGeometry, report: &mut ReportDoc) -> Result<(), CliError> {
    let cfg = &report.config;
    let lc = &cfg.lincheck;
    let op = LinearizedOperator::new(grid, bg)?;
    let lin = linearization_consistency(op.context(), bg, lc.directions, lc.step, cfg.solver.s, cfg.seed)?;
    let recovery = manufactured_recovery(&op, &cfg.solver, cfg.seed)?;
    let mut summary = VerificationSummary::new();
    summary.push(CheckResult::at_most("jacobian_vs_formula", lin.formula, lc.formula_tol, "core"));
    summary.push(CheckResult::at_most("jacobian_vs_tangent", lin.tangent, lc.tangent_tol, "core"));
    summary.push(CheckResult::at_most("manufactured_recovery", recovery, lc.manufactured_tol, "interior"));
    report.verification = Some(summary);
    Ok(())
}
