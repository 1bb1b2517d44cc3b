//! Executable checks of the geometric identities behind the construction.
//!
//! Every check returns a [`CheckResult`] carrying the measured value, the
//! tolerance it was compared against and the node set it was measured on.

use alloc::string::String;
use alloc::vec::Vec;

use crate::background::BackgroundGeometry;
use crate::constraint::{
    linearized_apply, linearized_formula, numeric_jacobian_apply, source_s, ConstraintState, SourceTensor,
};
use crate::curvature::MetricField;
use crate::error::{Error, Result};
use crate::field::{frame_norm, l2_inner, Field, FieldKind, OneFormField, Region, SymTensor2Field, WeightedNorm};
use crate::grid::FieldGrid;
use crate::math::{abs, ln, sqrt};
use crate::operators::OperatorContext;
use crate::sample::{FieldSampler, Support};
use crate::solver::{linear_solve, LinearizedOperator, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub region: String,
}

impl CheckResult {
    /// Passes when `value ≤ tolerance`; NaN never passes.
    pub fn at_most(name: &str, value: f64, tolerance: f64, region: &str) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            region: region.into(),
        }
    }

    /// Passes when `|value − target| ≤ tolerance`.
    pub fn near(name: &str, value: f64, target: f64, tolerance: f64, region: &str) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tolerance,
            pass: abs(value - target) <= tolerance,
            region: region.into(),
        }
    }

    /// Passes when `value > 0`.
    pub fn positive(name: &str, value: f64, region: &str) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tolerance: 0.0,
            pass: value > 0.0,
            region: region.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerificationSummary {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerificationSummary {
    pub fn new() -> Self {
        VerificationSummary {
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Largest frame norm over the core nodes.
pub fn core_sup<K: FieldKind>(field: &Field<K>, grid: &FieldGrid, bg: &BackgroundGeometry) -> Result<f64> {
    WeightedNorm::new(0.0).on(Region::Core).eval(field, grid, bg)
}

/// `max_core |R(g) + n(n−1)|`.
pub fn check_constant_scalar(ctx: &OperatorContext<'_>, tolerance: f64) -> Result<CheckResult> {
    let grid = ctx.grid();
    let n = grid.dim() as f64;
    let r = ctx.curvature().scalar();
    let mut worst = 0.0f64;
    for &p in grid.core_nodes() {
        let v = abs(r.at(p as usize)[0] + n * (n - 1.0));
        if v.is_nan() {
            return Err(Error::NonFinite {
                what: "scalar curvature",
                node: p as usize,
            });
        }
        worst = worst.max(v);
    }
    Ok(CheckResult::at_most("constant_scalar", worst, tolerance, Region::Core.name()))
}

/// `max_core |Ric(g) + (n−1) g|_frame`.
pub fn check_einstein(ctx: &OperatorContext<'_>, bg: &BackgroundGeometry, tolerance: f64) -> Result<CheckResult> {
    let mut e = ctx.curvature().ricci().clone();
    e.axpy(ctx.dim() as f64 - 1.0, ctx.metric_field())?;
    let v = core_sup(&e, ctx.grid(), bg)?;
    Ok(CheckResult::at_most("einstein", v, tolerance, Region::Core.name()))
}

/// `B_g(g0)` on the context metric, which vanishes when the identity map
/// `(M, g) → (M, g0)` is harmonic.
pub fn gauge_field(ctx: &OperatorContext<'_>, bg: &BackgroundGeometry) -> Result<OneFormField> {
    let g0 = MetricField::background(ctx.grid(), bg);
    ctx.gauge_b(g0.comps())
}

/// Weighted core norm of `B_g(g0)`.
pub fn check_gauge(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    s: f64,
    tolerance: f64,
) -> Result<CheckResult> {
    let b = gauge_field(ctx, bg)?;
    let v = WeightedNorm::new(s).on(Region::Core).eval(&b, ctx.grid(), bg)?;
    Ok(CheckResult::at_most("gauge", v, tolerance, Region::Core.name()))
}

/// `max |Tr_g S|` over the nodes where `S` is defined.
pub fn trace_sup(ctx: &OperatorContext<'_>, s: &SymTensor2Field) -> Result<f64> {
    let tr = ctx.metric().trace(ctx.grid(), s)?;
    let mut worst = 0.0f64;
    for &p in ctx.grid().region(s.level()) {
        worst = worst.max(abs(tr.at(p as usize)[0]));
    }
    Ok(worst)
}

/// Trace and divergence of `S = tf_g(T) + L̊_g ξ`, returned as two checks.
pub fn check_s_properties(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    t: &SymTensor2Field,
    xi: &OneFormField,
    div_tolerance: f64,
) -> Result<[CheckResult; 2]> {
    let s = source_s(ctx, t, xi)?;
    check_candidate_s(ctx, bg, &s, div_tolerance)
}

/// The trace and divergence checks for an arbitrary candidate `S`.
pub fn check_candidate_s(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    s: &SymTensor2Field,
    div_tolerance: f64,
) -> Result<[CheckResult; 2]> {
    let tr = trace_sup(ctx, s)?;
    let div = ctx.divergence_sym2(s)?;
    let d = core_sup(&div, ctx.grid(), bg)?;
    Ok([
        CheckResult::at_most("trace_s", tr, 1e-12, "all valid nodes"),
        CheckResult::at_most("div_s", d, div_tolerance, Region::Core.name()),
    ])
}

/// Core discrepancy of `2 B_g(L_g ω)` against `Δω − Ric·ω`.
pub fn gauge_identity_discrepancy(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    w: &OneFormField,
) -> Result<f64> {
    let lw = ctx.killing_sym(w)?;
    let mut lhs = ctx.gauge_b(&lw)?;
    lhs.scale(2.0);
    let rhs = ctx.vector_laplacian(w)?;
    let level = lhs.level().max(rhs.level());
    lhs.axpy(-1.0, &rhs)?;
    core_sup(&lhs.with_level(level), ctx.grid(), bg)
}

pub fn check_gauge_identity(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    w: &OneFormField,
    tolerance: f64,
) -> Result<CheckResult> {
    let v = gauge_identity_discrepancy(ctx, bg, w)?;
    Ok(CheckResult::at_most("gauge_identity", v, tolerance, Region::Core.name()))
}

/// Core norm of `B_g(Ric(g))`, zero by the contracted Bianchi identity.
pub fn check_bianchi(ctx: &OperatorContext<'_>, bg: &BackgroundGeometry, tolerance: f64) -> Result<CheckResult> {
    let b = ctx.gauge_b(ctx.curvature().ricci())?;
    let v = core_sup(&b, ctx.grid(), bg)?;
    Ok(CheckResult::at_most("bianchi", v, tolerance, Region::Core.name()))
}

/// Observed order `log2(e_coarse / e_fine)` of one grid halving.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    crate::math::log2(coarse / fine)
}

/// `|⟨div u, ω⟩ − ⟨u, L̊ω⟩| / (‖u‖ ‖ω‖)` in the `L²(g0)` pairing, with `u`
/// replaced by its trace-free part. Small when `div` is the formal adjoint
/// of `L̊` on fields vanishing near the cut.
pub fn adjointness_discrepancy(
    ctx: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    u: &SymTensor2Field,
    w: &OneFormField,
) -> Result<f64> {
    let grid = ctx.grid();
    let u = ctx.trace_free_part(u)?;
    let lw = ctx.conformal_killing(w)?;
    let a = l2_inner(&ctx.divergence_sym2(&u)?, w, grid, bg)?;
    let b = l2_inner(&u, &lw, grid, bg)?;
    let scale = sqrt(l2_inner(&u, &u, grid, bg)? * l2_inner(w, w, grid, bg)?);
    if !(scale > 0.0) {
        return Err(Error::param("u", "adjointness probe needs nonzero fields"));
    }
    Ok(abs(a - b) / scale)
}

/// Worst relative mismatches of the central-difference Jacobian at the
/// origin, measured in the weighted norm on the core region.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearizationCheck {
    pub step: f64,
    pub directions: usize,
    /// Against [`linearized_apply`](crate::constraint::linearized_apply).
    pub tangent: f64,
    /// Against [`linearized_formula`](crate::constraint::linearized_formula).
    pub formula: f64,
}

/// Probe direction for linearization checks: Gaussian-localized random
/// components, zero off the interior.
pub fn probe_direction(
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    seed: u64,
) -> Result<(SymTensor2Field, OneFormField)> {
    let mut sampler = FieldSampler::new(seed);
    let mut h: SymTensor2Field = sampler.physical(grid, bg, Support::Gaussian(0.3))?;
    let mut xi: OneFormField = sampler.physical(grid, bg, Support::Gaussian(0.3))?;
    // admissible directions vanish off the interior
    h.restrict_to(grid, grid.interior_nodes());
    xi.restrict_to(grid, grid.interior_nodes());
    Ok((h, xi))
}

pub fn linearization_consistency(
    ctx0: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    directions: usize,
    step: f64,
    s: f64,
    seed: u64,
) -> Result<LinearizationCheck> {
    let grid = ctx0.grid();
    let norm = WeightedNorm::new(s).on(Region::Core);
    let origin = ConstraintState::zeros(grid);
    let zero = SourceTensor::zero(grid);
    let (mut tangent, mut formula) = (0.0f64, 0.0f64);
    for d in 0..directions {
        let (dh, dxi) = probe_direction(grid, bg, seed.wrapping_add(d as u64))?;
        let num = numeric_jacobian_apply(&origin, &zero, &dh, &dxi, step, bg, grid)?;
        let lin = linearized_apply(ctx0, &dh, &dxi)?;
        let lit = linearized_formula(ctx0, &dh, &dxi)?;
        let scale = lin.norm(grid, bg, norm)?;
        tangent = tangent.max(num.difference(&lin)?.norm(grid, bg, norm)? / scale);
        formula = formula.max(num.difference(&lit)?.norm(grid, bg, norm)? / scale);
    }
    Ok(LinearizationCheck {
        step,
        directions,
        tangent,
        formula,
    })
}

/// Relative weighted error of `linear_solve(linearized_apply(δ))` against a
/// random compactly supported `δ`.
pub fn manufactured_recovery(op: &LinearizedOperator<'_>, config: &SolverConfig, seed: u64) -> Result<f64> {
    let grid = op.grid();
    let bg = BackgroundGeometry::new(grid.dim())?;
    let mut sampler = FieldSampler::new(seed);
    let support = Support::Ball(crate::CORE_RADIUS);
    let h: SymTensor2Field = sampler.physical(grid, &bg, support)?;
    let xi: OneFormField = sampler.physical(grid, &bg, support)?;
    let rhs = linearized_apply(op.context(), &h, &xi)?;
    let (h1, xi1, _) = linear_solve(op, &rhs, config)?;
    let norm = config.norm();
    let mut eh = h1;
    eh.axpy(-1.0, &h)?;
    let mut ex = xi1;
    ex.axpy(-1.0, &xi)?;
    let err = norm.eval(&eh, grid, &bg)?.max(norm.eval(&ex, grid, &bg)?);
    let size = norm.eval(&h, grid, &bg)?.max(norm.eval(&xi, grid, &bg)?);
    Ok(err / size)
}

/// Radial decay fit of a physical field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub exponent: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `(ρ, max frame norm)` per radial shell, ordered by radius.
    pub profile: Vec<(f64, f64)>,
}

/// Least-squares slope of `log max|u|_frame` against `log ρ` over the
/// annulus `r_lo ≤ |x| ≤ r_max − 2h`, restricted to interior nodes. Each shell
/// is one grid spacing thick and contributes its angular maximum.
pub fn decay_fit<K: FieldKind>(
    field: &Field<K>,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    r_lo: f64,
) -> Result<DecayFit> {
    field.check_grid(grid)?;
    let h = grid.spacing();
    let r_hi = grid.r_max() - 2.0 * h;
    if !(r_lo < r_hi) {
        return Err(Error::Fit(alloc::format!("empty annulus [{r_lo}, {r_hi}]")));
    }
    let shells = libm::ceil((r_hi - r_lo) / h) as usize;
    // (max norm, node radius) per shell
    let mut best: Vec<Option<(f64, f64)>> = alloc::vec![None; shells.max(1)];
    for &p in grid.interior_nodes() {
        let p = p as usize;
        let r = grid.radius(p);
        if r < r_lo || r > r_hi {
            continue;
        }
        let k = (((r - r_lo) / h) as usize).min(best.len() - 1);
        let v = frame_norm(field, grid, bg, p)?;
        if best[k].is_none_or(|(m, _)| v > m) {
            best[k] = Some((v, r));
        }
    }
    let mut profile = Vec::new();
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let floor = 1e-300;
    for (v, r) in best.into_iter().flatten() {
        let mut x = [0.0; 4];
        x[0] = r;
        let rho = bg.rho_at(&x[..grid.dim()]);
        profile.push((rho, v));
        if v <= floor {
            return Err(Error::Fit(alloc::format!("field vanishes on the shell at |x| = {r:.3}")));
        }
        let (lx, ly) = (ln(rho), ln(v));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let m = profile.len() as f64;
    if profile.len() < 2 {
        return Err(Error::Fit("fewer than two shells on the fit annulus".into()));
    }
    let denom = m * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::Fit("degenerate radial sample".into()));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let r_fit_max = profile.iter().map(|(rho, _)| sqrt(1.0 - 2.0 * rho)).fold(0.0, f64::max);
    Ok(DecayFit {
        exponent: slope,
        r_min: r_lo,
        r_max: r_fit_max,
        profile,
    })
}

/// Smallest Rayleigh quotient `⟨(Δ_L + 2(n−1))u, u⟩ / ⟨u, u⟩` over random
/// trace-free fields supported in the core ball.
pub fn nondegeneracy_probe(
    ctx0: &OperatorContext<'_>,
    bg: &BackgroundGeometry,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut sampler = FieldSampler::new(seed).with_bandwidth(2.0);
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let u: SymTensor2Field = sampler.physical(ctx0.grid(), bg, Support::Ball(crate::CORE_RADIUS - 0.1))?;
        let u = ctx0.trace_free_part(&u)?;
        best = best.min(rayleigh_quotient(ctx0, bg, &u)?);
    }
    Ok(best)
}

/// `⟨(Δ_L + 2(n−1))u, u⟩ / ⟨u, u⟩` in the `L²(g0)` pairing.
pub fn rayleigh_quotient(ctx0: &OperatorContext<'_>, bg: &BackgroundGeometry, u: &SymTensor2Field) -> Result<f64> {
    let grid = ctx0.grid();
    let mut a = ctx0.lichnerowicz(u)?;
    a.axpy(2.0 * (ctx0.dim() as f64 - 1.0), u)?;
    let num = l2_inner(&a, u, grid, bg)?;
    let den = l2_inner(u, u, grid, bg)?;
    if !(den > 0.0) {
        return Err(Error::param("u", "probe field vanishes on the interior"));
    }
    Ok(num / den)
}

/// Tolerances of the post-solve battery.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BatteryTolerances {
    pub constant_scalar: f64,
    pub gauge: f64,
    pub div_s: f64,
    pub decay: f64,
}

impl Default for BatteryTolerances {
    fn default() -> Self {
        BatteryTolerances {
            constant_scalar: 5e-4,
            gauge: 1e-4,
            div_s: 1e-4,
            decay: 0.3,
        }
    }
}

/// Post-solve checks on `g = g0 + h`: constant scalar curvature, gauge,
/// trace and divergence of `S`, and, for a rho-power source, the decay rate
/// of `h`.
pub fn battery(
    state: &ConstraintState,
    t: &SourceTensor,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
    tol: &BatteryTolerances,
) -> Result<VerificationSummary> {
    let metric = state.metric(grid, bg)?;
    let ctx = OperatorContext::without_riemann(grid, metric)?;
    let (h, xi) = state.physical(grid, bg)?;
    let mut out = VerificationSummary::new();
    out.push(check_constant_scalar(&ctx, tol.constant_scalar)?);
    out.push(check_gauge(&ctx, bg, 0.0, tol.gauge)?);
    for c in check_s_properties(&ctx, bg, &t.field, &xi, tol.div_s)? {
        out.push(c);
    }
    if let Some(recipe) = t.recipe {
        if recipe.profile == crate::constraint::SourceProfile::RhoPower && recipe.amplitude > 0.0 {
            let fit = decay_fit(&h, grid, bg, 0.5)?;
            out.push(CheckResult::near("decay_exponent", fit.exponent, recipe.decay, tol.decay, "annulus 0.5 <= |x|"));
        }
    }
    Ok(out)
}
