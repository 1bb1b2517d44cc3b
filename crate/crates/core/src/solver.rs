//! Linear solves against the background linearization and the outer
//! nonlinear iterations.
//!
//! Vectors are in pack order with frame components: unknowns `(h̄, ξ̄)` and
//! residuals `(ρ² E1, ρ E2)` on interior nodes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::background::BackgroundGeometry;
use crate::constraint::{
    jacobian_apply_rescaled, pack, pack_field, pack_residual, residual_gauged, row1_tangent,
    unpack, unpack_field, ConstraintState, ResidualPair, SourceTensor,
};
use crate::error::{Error, Result};
use crate::field::{OneFormField, Region, Repr, SymTensor2Field, WeightedNorm};
use crate::grid::FieldGrid;
use crate::krylov::{fgmres, norm, GmresOptions, KrylovStats};
use crate::math::abs;
use crate::operators::OperatorContext;
use crate::tensor::sym_len;
use crate::verify::VerificationSummary;

/// Relative accuracy of the background solves that precondition each
/// Newton system.
const NEWTON_INNER_TOL: f64 = 1e-4;
/// Upper bound of the Newton forcing term; below it the forcing term follows
/// the residual, which keeps the convergence quadratic.
const NEWTON_MAX_FORCING: f64 = 1e-3;

/// Outer iteration flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SolverMode {
    /// `x ← x − L0^{-1} F(x)` with the fixed background linearization.
    IftPicard,
    /// Newton steps with central-difference Jacobian products at the
    /// current iterate, preconditioned by the background solve.
    NewtonFd,
}

impl SolverMode {
    pub fn name(self) -> &'static str {
        match self {
            SolverMode::IftPicard => "ift-picard",
            SolverMode::NewtonFd => "newton-fd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Preconditioner {
    None,
    /// Diagonal of the principal part of each block.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub restart: usize,
    pub nonlinear_tol: f64,
    pub nonlinear_max_iter: usize,
    /// Weight exponent of the residual and solution norms.
    pub s: f64,
    pub continuation_steps: usize,
    pub preconditioner: Preconditioner,
    /// Probe step of the central-difference Jacobian.
    pub jacobian_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::IftPicard,
            linear_tol: 1e-10,
            linear_max_iter: 2000,
            restart: 40,
            nonlinear_tol: 1e-10,
            nonlinear_max_iter: 25,
            s: 1.5,
            continuation_steps: 1,
            preconditioner: Preconditioner::Diagonal,
            jacobian_step: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.linear_tol) {
            return Err(Error::param("linear_tol", "must be positive"));
        }
        if !positive(self.nonlinear_tol) {
            return Err(Error::param("nonlinear_tol", "must be positive"));
        }
        if !positive(self.jacobian_step) {
            return Err(Error::param("jacobian_step", "must be positive"));
        }
        if self.linear_max_iter == 0 || self.restart == 0 {
            return Err(Error::param("linear_max_iter", "iteration limits must be positive"));
        }
        if self.continuation_steps == 0 {
            return Err(Error::param("continuation_steps", "must be at least 1"));
        }
        if !self.s.is_finite() {
            return Err(Error::param("s", "must be finite"));
        }
        Ok(())
    }

    fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.linear_tol,
            max_iter: self.linear_max_iter,
            restart: self.restart,
        }
    }

    /// Weighted norm used for residuals and solution sizes.
    pub fn norm(&self) -> WeightedNorm {
        WeightedNorm::new(self.s).on(Region::Interior)
    }
}

/// Outcome of a nonlinear solve.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub mode: String,
    pub converged: bool,
    pub iterations: usize,
    /// `max(‖E1‖, ‖E2‖)` per iterate, starting with the initial state.
    pub residual_history: Vec<f64>,
    pub e1_history: Vec<f64>,
    pub e2_history: Vec<f64>,
    /// Krylov iterations spent per outer iteration.
    pub linear_iterations: Vec<usize>,
    pub h_norm: f64,
    pub xi_norm: f64,
    /// Fraction of the target source used by each continuation stage.
    pub stage_fractions: Vec<f64>,
    pub verification: Option<VerificationSummary>,
    pub wall_time_s: Option<f64>,
}

impl SolveReport {
    fn push(&mut self, e1: f64, e2: f64) {
        self.e1_history.push(e1);
        self.e2_history.push(e2);
        self.residual_history.push(e1.max(e2));
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// The background linearization acting on frame-component vectors.
pub struct LinearizedOperator<'g> {
    ctx: OperatorContext<'g>,
    bg: BackgroundGeometry,
    diag_h: Vec<f64>,
    diag_xi: Vec<f64>,
}

impl<'g> LinearizedOperator<'g> {
    pub fn new(grid: &'g FieldGrid, bg: &BackgroundGeometry) -> Result<Self> {
        let ctx = OperatorContext::background(grid, bg)?;
        let n = grid.dim();
        let nf = n as f64;
        let q = grid.centered_square_sum();
        let mut diag_h = Vec::new();
        let mut diag_xi = Vec::new();
        for &p in grid.interior_nodes() {
            let rho = bg.rho_at(&grid.coords(p as usize));
            let r2 = rho * rho;
            let dh = (nf - 1.0) + 0.5 * r2 * nf * q;
            diag_h.extend(core::iter::repeat_n(dh, sym_len(n)));
            let dx = 0.5 * (nf - 1.0) + r2 * q * (0.5 * nf + 0.5 - 1.0 / nf);
            diag_xi.extend(core::iter::repeat_n(dx, n));
        }
        Ok(LinearizedOperator {
            ctx,
            bg: *bg,
            diag_h,
            diag_xi,
        })
    }

    pub fn context(&self) -> &OperatorContext<'g> {
        &self.ctx
    }

    pub fn grid(&self) -> &'g FieldGrid {
        self.ctx.grid()
    }

    /// Diagonal preconditioner entries of the `h̄` and `ξ̄` blocks.
    pub fn diagonal(&self) -> (&[f64], &[f64]) {
        (&self.diag_h, &self.diag_xi)
    }

    fn h_len(&self) -> usize {
        self.diag_h.len()
    }

    fn xi_len(&self) -> usize {
        self.diag_xi.len()
    }

    /// `ρ² (½Δ_L + (n−1)) ρ^{-2}` on the `h̄` block.
    pub fn apply_row1(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = self.grid();
        let hbar: SymTensor2Field = unpack_field(v, grid, Repr::Rescaled);
        let e1 = row1_tangent(&self.ctx, &hbar)?;
        write_rescaled(&e1, grid, &self.bg, out)
    }

    /// `ρ div L̊ ρ^{-1}` on the `ξ̄` block.
    pub fn apply_row2(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = self.grid();
        let xi = self.xi_physical(v)?;
        let lx = self.ctx.conformal_killing(&xi)?;
        let e2 = self.ctx.divergence_sym2(&lx)?;
        write_rescaled(&e2, grid, &self.bg, out)
    }

    /// `ρ² L̊ ρ^{-1}`, the coupling of `ξ̄` into row 1.
    pub fn apply_coupling(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let grid = self.grid();
        let xi = self.xi_physical(v)?;
        let lx = self.ctx.conformal_killing(&xi)?;
        write_rescaled(&lx, grid, &self.bg, out)
    }

    fn xi_physical(&self, v: &[f64]) -> Result<OneFormField> {
        let xibar: OneFormField = unpack_field(v, self.grid(), Repr::Rescaled);
        xibar.to_physical(self.grid(), &self.bg)
    }

    /// Full block operator on a packed vector.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let (nh, nx) = (self.h_len(), self.xi_len());
        check_len(v.len(), nh + nx)?;
        check_len(out.len(), nh + nx)?;
        let (vh, vx) = v.split_at(nh);
        let (oh, ox) = out.split_at_mut(nh);
        self.apply_row1(vh, oh)?;
        let mut c = vec![0.0; nh];
        self.apply_coupling(vx, &mut c)?;
        for (o, ci) in oh.iter_mut().zip(&c) {
            *o -= ci;
        }
        self.apply_row2(vx, ox)
    }

    /// Solves the block-triangular system: row 2 for `ξ̄`, then row 1 for `h̄`.
    pub fn solve(
        &self,
        rhs: &[f64],
        config: &SolverConfig,
        opts: &GmresOptions,
    ) -> Result<(Vec<f64>, KrylovStats)> {
        let (nh, nx) = (self.h_len(), self.xi_len());
        check_len(rhs.len(), nh + nx)?;
        let (bh, bx) = rhs.split_at(nh);
        let mut x = vec![0.0; nh + nx];
        let diag = config.preconditioner == Preconditioner::Diagonal;
        let (xh, xx) = x.split_at_mut(nh);
        let s2 = fgmres(
            |v, o| self.apply_row2(v, o),
            |v, o| precondition(diag, &self.diag_xi, v, o),
            bx,
            xx,
            opts,
        )?;
        let mut b1 = vec![0.0; nh];
        self.apply_coupling(xx, &mut b1)?;
        for (b, r) in b1.iter_mut().zip(bh) {
            *b += r;
        }
        let s1 = fgmres(
            |v, o| self.apply_row1(v, o),
            |v, o| precondition(diag, &self.diag_h, v, o),
            &b1,
            xh,
            opts,
        )?;
        Ok((
            x,
            KrylovStats {
                iterations: s1.iterations + s2.iterations,
                residual: s1.residual.max(s2.residual),
            },
        ))
    }
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(alloc::format!(
            "vector of length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn precondition(diag: bool, d: &[f64], v: &[f64], out: &mut [f64]) -> Result<()> {
    if diag {
        for ((o, x), di) in out.iter_mut().zip(v).zip(d) {
            *o = x / di;
        }
    } else {
        out.copy_from_slice(v);
    }
    Ok(())
}

fn write_rescaled<K: crate::field::FieldKind>(
    f: &crate::field::Field<K>,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    out: &mut [f64],
) -> Result<()> {
    let mut buf = Vec::with_capacity(out.len());
    pack_field(&f.to_rescaled(grid, bg)?, grid, &mut buf);
    check_len(buf.len(), out.len())?;
    out.copy_from_slice(&buf);
    Ok(())
}

/// Solves `L0 (δh, δξ) = rhs` and returns physical `(δh, δξ)`.
pub fn linear_solve(
    op: &LinearizedOperator<'_>,
    rhs: &ResidualPair,
    config: &SolverConfig,
) -> Result<(SymTensor2Field, OneFormField, KrylovStats)> {
    config.validate()?;
    let grid = op.grid();
    let b = pack_residual(rhs, grid, &op.bg)?;
    let (x, stats) = op.solve(&b, config, &config.gmres())?;
    let st = unpack(&x, grid)?;
    let (h, xi) = st.physical(grid, &op.bg)?;
    Ok((h, xi, stats))
}

struct Problem<'a, 'g> {
    op: &'a LinearizedOperator<'g>,
    t: &'a SourceTensor,
    config: &'a SolverConfig,
}

impl Problem<'_, '_> {
    fn grid(&self) -> &FieldGrid {
        self.op.grid()
    }

    fn residual(&self, st: &ConstraintState) -> Result<(ResidualPair, f64, f64)> {
        let r = residual_gauged(st, self.t, &self.op.bg, self.grid())?;
        let (a, b) = r.norms(self.grid(), &self.op.bg, self.config.norm())?;
        Ok((r, a, b))
    }

    fn finish(&self, st: &ConstraintState, report: &mut SolveReport) -> Result<()> {
        let (h, xi) = st.physical(self.grid(), &self.op.bg)?;
        let norm = self.config.norm();
        report.h_norm = norm.eval(&h, self.grid(), &self.op.bg)?;
        report.xi_norm = norm.eval(&xi, self.grid(), &self.op.bg)?;
        Ok(())
    }

    /// Shared outer loop; `step` returns the correction to subtract.
    fn iterate(
        &self,
        start: ConstraintState,
        report: &mut SolveReport,
        mut step: impl FnMut(&ConstraintState, &ResidualPair) -> Result<(Vec<f64>, usize)>,
    ) -> Result<ConstraintState> {
        let tol = self.config.nonlinear_tol;
        let (mut r, a, b) = self.residual(&start)?;
        report.push(a, b);
        let first = a.max(b);
        let mut state = start;
        let mut increases = 0;
        let mut iterations = 0;
        loop {
            let cur = report.final_residual();
            if cur <= tol {
                report.converged = true;
                break;
            }
            if iterations >= self.config.nonlinear_max_iter {
                report.iterations += iterations;
                return Err(Error::NotConverged {
                    iterations,
                    residual: cur,
                    history: report.residual_history.clone(),
                });
            }
            let (delta, lin) = step(&state, &r)?;
            report.linear_iterations.push(lin);
            let mut x = pack(&state, self.grid());
            for (xi, d) in x.iter_mut().zip(&delta) {
                *xi -= d;
            }
            iterations += 1;
            let next = unpack(&x, self.grid())?;
            let evaluated = match self.residual(&next) {
                Ok(v) => v,
                Err(e @ (Error::NotPositiveDefinite { .. } | Error::NonFinite { .. })) => {
                    report.iterations += iterations;
                    let _ = e;
                    return Err(Error::Diverged {
                        iterations,
                        residual: f64::INFINITY,
                        history: report.residual_history.clone(),
                    });
                }
                Err(e) => return Err(e),
            };
            let (rn, a, b) = evaluated;
            report.push(a, b);
            let new = a.max(b);
            increases = if new > cur { increases + 1 } else { 0 };
            if increases >= 2 || new > 1e6 * first || !new.is_finite() {
                report.iterations += iterations;
                return Err(Error::Diverged {
                    iterations,
                    residual: new,
                    history: report.residual_history.clone(),
                });
            }
            state = next;
            r = rn;
        }
        report.iterations += iterations;
        Ok(state)
    }
}

fn residual_norm_of(problem: &Problem<'_, '_>, r: &ResidualPair) -> Result<f64> {
    r.norm(problem.grid(), &problem.op.bg, problem.config.norm())
}

/// Fixed-slope iteration `x ← x − L0^{-1} F(x, T)`.
pub fn ift_iterate(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
) -> Result<(ConstraintState, SolveReport)> {
    ift_from(op, t, config, ConstraintState::zeros(op.grid()))
}

fn ift_from(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
    start: ConstraintState,
) -> Result<(ConstraintState, SolveReport)> {
    config.validate()?;
    let problem = Problem { op, t, config };
    let mut report = SolveReport {
        mode: SolverMode::IftPicard.name().into(),
        ..SolveReport::default()
    };
    let gm = config.gmres();
    let state = problem.iterate(start, &mut report, |_, r| {
        let b = pack_residual(r, op.grid(), &op.bg)?;
        let (x, stats) = op.solve(&b, config, &gm)?;
        Ok((x, stats.iterations))
    })?;
    problem.finish(&state, &mut report)?;
    Ok((state, report))
}

/// Newton iteration on the central-difference Jacobian of the gauged residual.
pub fn newton_fd(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
) -> Result<(ConstraintState, SolveReport)> {
    newton_from(op, t, config, ConstraintState::zeros(op.grid()))
}

fn newton_from(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
    start: ConstraintState,
) -> Result<(ConstraintState, SolveReport)> {
    config.validate()?;
    let problem = Problem { op, t, config };
    let mut report = SolveReport {
        mode: SolverMode::NewtonFd.name().into(),
        ..SolveReport::default()
    };
    let grid = op.grid();
    let bg = op.bg;
    let inner = GmresOptions {
        tol: config.linear_tol.max(NEWTON_INNER_TOL),
        ..config.gmres()
    };
    let state = problem.iterate(start, &mut report, |state, r| {
        let b = pack_residual(r, grid, &bg)?;
        let current = residual_norm_of(&problem, r)?;
        let outer = GmresOptions {
            tol: current.min(NEWTON_MAX_FORCING).max(config.linear_tol),
            ..config.gmres()
        };
        let mut x = vec![0.0; b.len()];
        let mut inner_iters = 0;
        let solved = fgmres(
            |v, o| {
                // unit max-norm probe so the step size means the same thing
                // for every Krylov vector
                let vmax = v.iter().fold(0.0f64, |m, a| m.max(abs(*a)));
                if vmax == 0.0 {
                    o.iter_mut().for_each(|a| *a = 0.0);
                    return Ok(());
                }
                let dir: Vec<f64> = v.iter().map(|a| a / vmax).collect();
                let dir = unpack(&dir, grid)?;
                let jv = jacobian_apply_rescaled(state, t, &dir, config.jacobian_step, &bg, grid)?;
                let packed = pack_residual(&jv, grid, &bg)?;
                for (oi, pi) in o.iter_mut().zip(&packed) {
                    *oi = vmax * pi;
                }
                Ok(())
            },
            |v, o| {
                let (y, s) = op.solve(v, config, &inner)?;
                inner_iters += s.iterations;
                o.copy_from_slice(&y);
                Ok(())
            },
            &b,
            &mut x,
            &outer,
        );
        let outer_iters = match solved {
            Ok(stats) => stats.iterations,
            // the probed Jacobian is only linear to O(step²); a stall just
            // above the forcing term still gives a usable Newton direction
            Err(Error::LinearStall { iterations, residual }) if residual <= 10.0 * outer.tol => iterations,
            Err(e) => return Err(e),
        };
        Ok((x, outer_iters + inner_iters))
    })?;
    problem.finish(&state, &mut report)?;
    Ok((state, report))
}

/// Runs the configured mode, ramping the source amplitude over
/// `config.continuation_steps` stages and warm-starting each stage.
pub fn continuation(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
) -> Result<(ConstraintState, SolveReport)> {
    config.validate()?;
    let steps = config.continuation_steps;
    let grid = op.grid();
    let mut state = ConstraintState::zeros(grid);
    let mut total = SolveReport {
        mode: config.mode.name().into(),
        ..SolveReport::default()
    };
    for j in 1..=steps {
        let frac = j as f64 / steps as f64;
        let mut field = t.field.clone();
        field.scale(frac);
        let stage = SourceTensor {
            recipe: t.recipe.map(|r| r.with_amplitude(r.amplitude * frac)),
            field,
        };
        let result = match config.mode {
            SolverMode::IftPicard => ift_from(op, &stage, config, state.clone()),
            SolverMode::NewtonFd => newton_from(op, &stage, config, state.clone()),
        };
        match result {
            Ok((st, rep)) => {
                state = st;
                total.iterations += rep.iterations;
                total.residual_history.extend(rep.residual_history);
                total.e1_history.extend(rep.e1_history);
                total.e2_history.extend(rep.e2_history);
                total.linear_iterations.extend(rep.linear_iterations);
                total.stage_fractions.push(frac);
                total.h_norm = rep.h_norm;
                total.xi_norm = rep.xi_norm;
                total.converged = rep.converged;
            }
            Err(e) => {
                return Err(match e {
                    Error::Diverged {
                        iterations,
                        residual,
                        history,
                    } => {
                        let mut h = total.residual_history.clone();
                        h.extend(history);
                        Error::Diverged {
                            iterations: total.iterations + iterations,
                            residual,
                            history: h,
                        }
                    }
                    Error::NotConverged {
                        iterations,
                        residual,
                        history,
                    } => {
                        let mut h = total.residual_history.clone();
                        h.extend(history);
                        Error::NotConverged {
                            iterations: total.iterations + iterations,
                            residual,
                            history: h,
                        }
                    }
                    other => other,
                })
            }
        }
    }
    Ok((state, total))
}

/// Dispatches on `config.mode`; equivalent to [`continuation`].
pub fn solve(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    config: &SolverConfig,
) -> Result<(ConstraintState, SolveReport)> {
    continuation(op, t, config)
}

/// Residual of a packed state, exposed for diagnostics.
pub fn packed_residual(
    op: &LinearizedOperator<'_>,
    t: &SourceTensor,
    x: &[f64],
) -> Result<Vec<f64>> {
    let st = unpack(x, op.grid())?;
    let r = residual_gauged(&st, t, &op.bg, op.grid())?;
    pack_residual(&r, op.grid(), &op.bg)
}

/// `‖v‖₂` of a packed vector.
pub fn vector_norm(v: &[f64]) -> f64 {
    norm(v)
}
