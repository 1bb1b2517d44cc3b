//! The gauge-broken constraint system.
//!
//! For `g = g0 + h` and a prescribed symmetric tensor `T`:
//!
//! ```text
//! S  = T − (1/n) Tr_g(T) g + L̊_g ξ
//! E1 = Ric(g) + (n−1) g − L_g(B_g(g0)) − S
//! E2 = div_g S
//! ```
//!
//! Unknowns are stored rescaled, `h̄ = ρ² h` and `ξ̄ = ρ ξ`, and vanish off the
//! interior nodes. The solver sees the residual in frame components
//! `(ρ² E1, ρ E2)` on interior nodes, so unknowns and equations pair up one
//! to one.

use alloc::vec;
use alloc::vec::Vec;

use crate::background::BackgroundGeometry;
use crate::curvature::MetricField;
use crate::error::{Error, Result};
use crate::field::{
    Field, FieldKind, OneFormField, Region, Repr, SymTensor2Field, WeightedNorm,
};
use crate::grid::FieldGrid;
use crate::math::powf;
use crate::operators::OperatorContext;
use crate::sample::{FieldSampler, Support};
use crate::tensor::{sym_len, SymLayout};

/// Radial profile of a generated source.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields))]
pub enum SourceProfile {
    /// `|T|_frame = ε ρ^{s_T} |A|` with `max |A| = 1` on the interior.
    RhoPower,
    /// `|T|_frame = ε exp(−|x|²/w²) |A|`.
    GaussianBump { width: f64 },
}

/// How to build a source tensor; deterministic given the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SourceRecipe {
    pub profile: SourceProfile,
    pub amplitude: f64,
    pub decay: f64,
    pub seed: u64,
}

impl Default for SourceRecipe {
    /// Rho-power source with `ε = 1e-3`, `s_T = 1.5`, seed 1.
    fn default() -> Self {
        SourceRecipe::rho_power(1e-3, 1.5, 1)
    }
}

impl SourceRecipe {
    pub fn rho_power(amplitude: f64, decay: f64, seed: u64) -> Self {
        SourceRecipe {
            profile: SourceProfile::RhoPower,
            amplitude,
            decay,
            seed,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }
}

/// A physical source tensor together with the recipe that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTensor {
    pub recipe: Option<SourceRecipe>,
    pub field: SymTensor2Field,
}

impl SourceTensor {
    /// Wraps an arbitrary physical tensor.
    pub fn from_field(field: SymTensor2Field) -> Result<Self> {
        field.require(Repr::Physical)?;
        Ok(SourceTensor {
            recipe: None,
            field,
        })
    }

    pub fn zero(grid: &FieldGrid) -> Self {
        SourceTensor {
            recipe: None,
            field: SymTensor2Field::zeros(grid, Repr::Physical),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.field.data().iter().all(|v| *v == 0.0)
    }
}

pub fn make_source(
    recipe: &SourceRecipe,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
) -> Result<SourceTensor> {
    if !(recipe.amplitude >= 0.0 && recipe.amplitude.is_finite()) {
        return Err(Error::param("amplitude", "must be finite and non-negative"));
    }
    if !recipe.decay.is_finite() {
        return Err(Error::param("decay", "must be finite"));
    }
    if recipe.amplitude == 0.0 {
        return Ok(SourceTensor {
            recipe: Some(*recipe),
            field: SymTensor2Field::zeros(grid, Repr::Physical),
        });
    }
    let mut angular: SymTensor2Field =
        FieldSampler::new(recipe.seed).rescaled(grid, Support::Everywhere);
    // normalize on the interior so the weighted norm is exactly ε
    let lay = SymLayout::new(grid.dim());
    let peak = grid
        .interior_nodes()
        .iter()
        .map(|&p| crate::math::sqrt(sym_contract_euclid(&lay, angular.at(p as usize))))
        .fold(0.0f64, f64::max);
    if peak > 0.0 {
        angular.scale(1.0 / peak);
    }
    let eps = recipe.amplitude;
    for &p in grid.region(0) {
        let p = p as usize;
        let x = grid.coords(p);
        let w = match recipe.profile {
            SourceProfile::RhoPower => eps * powf(bg.rho_at(&x), recipe.decay),
            SourceProfile::GaussianBump { width } => {
                let r2 = crate::grid::norm2(&x[..grid.dim()]);
                eps * crate::math::exp(-r2 / (width * width))
            }
        };
        angular.at_mut(p).iter_mut().for_each(|v| *v *= w);
    }
    Ok(SourceTensor {
        recipe: Some(*recipe),
        field: angular.to_physical(grid, bg)?,
    })
}

fn sym_contract_euclid(lay: &SymLayout, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..lay.len() {
        let (i, j) = lay.pair(k);
        s += if i == j { a[k] * a[k] } else { 2.0 * a[k] * a[k] };
    }
    s
}

/// `S = T − (1/n) Tr_g(T) g + L̊ξ` on the context metric.
pub fn source_s(
    ctx: &OperatorContext<'_>,
    t: &SymTensor2Field,
    xi: &OneFormField,
) -> Result<SymTensor2Field> {
    let mut s = ctx.conformal_killing(xi)?;
    let tf = ctx.trace_free_part(t)?;
    s.axpy(1.0, &tf)?;
    Ok(s)
}

/// Rescaled unknowns `(h̄, ξ̄)`, zero off the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintState {
    pub hbar: SymTensor2Field,
    pub xibar: OneFormField,
}

impl ConstraintState {
    pub fn zeros(grid: &FieldGrid) -> Self {
        ConstraintState {
            hbar: SymTensor2Field::zeros(grid, Repr::Rescaled),
            xibar: OneFormField::zeros(grid, Repr::Rescaled),
        }
    }

    /// Checks flags, grid shape, finiteness and the Dirichlet condition.
    pub fn validate(&self, grid: &FieldGrid) -> Result<()> {
        self.hbar.check_grid(grid)?;
        self.xibar.check_grid(grid)?;
        self.hbar.require(Repr::Rescaled)?;
        self.xibar.require(Repr::Rescaled)?;
        let interior = interior_vec(grid);
        for p in 0..grid.node_count() {
            let (h, x) = (self.hbar.at(p), self.xibar.at(p));
            if h.iter().chain(x).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "constraint state",
                    node: p,
                });
            }
            if !interior[p] && h.iter().chain(x).any(|v| *v != 0.0) {
                return Err(Error::Dirichlet { node: p });
            }
        }
        Ok(())
    }

    /// Physical `(h, ξ)`.
    pub fn physical(
        &self,
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
    ) -> Result<(SymTensor2Field, OneFormField)> {
        Ok((self.hbar.to_physical(grid, bg)?, self.xibar.to_physical(grid, bg)?))
    }

    /// The metric `g0 + h`.
    pub fn metric(&self, grid: &FieldGrid, bg: &BackgroundGeometry) -> Result<MetricField> {
        MetricField::perturbed(grid, bg, &self.hbar)
    }

    /// `self + a·(δh̄, δξ̄)`.
    pub fn offset(&self, a: f64, dir: &ConstraintState) -> Result<ConstraintState> {
        let mut out = self.clone();
        out.hbar.axpy(a, &dir.hbar)?;
        out.xibar.axpy(a, &dir.xibar)?;
        Ok(out)
    }

    /// Rescaled state of physical `(h, ξ)`, cut to the interior.
    pub fn from_physical(
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
        h: &SymTensor2Field,
        xi: &OneFormField,
    ) -> Result<ConstraintState> {
        let mut hbar = h.to_rescaled(grid, bg)?.with_level(0);
        let mut xibar = xi.to_rescaled(grid, bg)?.with_level(0);
        hbar.restrict_to(grid, grid.interior_nodes());
        xibar.restrict_to(grid, grid.interior_nodes());
        Ok(ConstraintState { hbar, xibar })
    }
}

/// `(E1, E2)` in physical components.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub e1: SymTensor2Field,
    pub e2: OneFormField,
}

impl ResidualPair {
    pub fn level(&self) -> usize {
        self.e1.level().max(self.e2.level())
    }

    /// `(‖E1‖, ‖E2‖)` in the given weighted norm.
    pub fn norms(
        &self,
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
        norm: WeightedNorm,
    ) -> Result<(f64, f64)> {
        Ok((norm.eval(&self.e1, grid, bg)?, norm.eval(&self.e2, grid, bg)?))
    }

    /// `max(‖E1‖, ‖E2‖)`.
    pub fn norm(&self, grid: &FieldGrid, bg: &BackgroundGeometry, norm: WeightedNorm) -> Result<f64> {
        let (a, b) = self.norms(grid, bg, norm)?;
        Ok(a.max(b))
    }

    /// `self − other`, valid where both are.
    pub fn difference(&self, other: &ResidualPair) -> Result<ResidualPair> {
        let mut out = self.clone();
        out.e1.axpy(-1.0, &other.e1)?;
        out.e2.axpy(-1.0, &other.e2)?;
        Ok(out)
    }
}

fn residual_impl(
    state: &ConstraintState,
    t: &SourceTensor,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
    gauged: bool,
) -> Result<ResidualPair> {
    state.validate(grid)?;
    t.field.check_grid(grid)?;
    let metric = state.metric(grid, bg)?;
    let ctx = OperatorContext::without_riemann(grid, metric)?;
    let xi = state.xibar.to_physical(grid, bg)?;
    let s = source_s(&ctx, &t.field, &xi)?;
    let e2 = ctx.divergence_sym2(&s)?;
    let n = grid.dim() as f64;
    let mut e1 = ctx.curvature().ricci().clone();
    e1.axpy(n - 1.0, ctx.metric_field())?;
    e1.axpy(-1.0, &s)?;
    if gauged {
        let gauge = gauge_term(&ctx, bg)?;
        e1.axpy(-1.0, &gauge)?;
    }
    let level = e1.level().max(e2.level());
    let mut e1 = e1.with_level(level);
    let mut e2 = e2.with_level(level);
    e1.restrict_to(grid, grid.region(level));
    e2.restrict_to(grid, grid.region(level));
    e1.check_finite(grid, "E1")?;
    e2.check_finite(grid, "E2")?;
    Ok(ResidualPair { e1, e2 })
}

/// `L_g(B_g(g0))` on the context metric.
pub fn gauge_term(ctx: &OperatorContext<'_>, bg: &BackgroundGeometry) -> Result<SymTensor2Field> {
    let g0 = MetricField::background(ctx.grid(), bg);
    let b = ctx.gauge_b(g0.comps())?;
    ctx.killing_sym(&b)
}

/// `E1 = Ric(g) + (n−1)g − L_g(B_g(g0)) − S`, `E2 = div_g S`.
pub fn residual_gauged(
    state: &ConstraintState,
    t: &SourceTensor,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
) -> Result<ResidualPair> {
    residual_impl(state, t, bg, grid, true)
}

/// The same system without the gauge-breaking term.
pub fn residual_ungauged(
    state: &ConstraintState,
    t: &SourceTensor,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
) -> Result<ResidualPair> {
    residual_impl(state, t, bg, grid, false)
}

/// The linearization at `(0, 0)` on the background context:
/// `(½Δ_L δh + (n−1)δh − L̊δξ, div L̊δξ)`.
///
/// The `δh` part is the exact derivative of the discrete residual, see
/// [`row1_tangent`]; [`row1_principal`] is the same operator written with
/// the Lichnerowicz Laplacian and agrees with it up to truncation error.
pub fn linearized_apply(
    ctx0: &OperatorContext<'_>,
    dh: &SymTensor2Field,
    dxi: &OneFormField,
) -> Result<ResidualPair> {
    let grid = ctx0.grid();
    let row2_src = ctx0.conformal_killing(dxi)?;
    let e2 = ctx0.divergence_sym2(&row2_src)?;
    let mut e1 = row1_tangent(ctx0, &dh.to_rescaled(grid, &ctx0_background(ctx0)?)?)?;
    e1.axpy(-1.0, &row2_src)?;
    let level = e1.level().max(e2.level());
    let mut e1 = e1.with_level(level);
    let mut e2 = e2.with_level(level);
    e1.restrict_to(grid, grid.region(level));
    e2.restrict_to(grid, grid.region(level));
    Ok(ResidualPair { e1, e2 })
}

fn ctx0_background(ctx0: &OperatorContext<'_>) -> Result<BackgroundGeometry> {
    BackgroundGeometry::new(ctx0.dim())
}

/// Derivative at `h̄ = 0` of the discrete `Ric(g) + (n−1)g − L_g(B_g(g0))`
/// along a rescaled direction `h̄`, in physical components on region 2.
pub fn row1_tangent(ctx0: &OperatorContext<'_>, hbar: &SymTensor2Field) -> Result<SymTensor2Field> {
    let grid = ctx0.grid();
    hbar.check_grid(grid)?;
    hbar.require(Repr::Rescaled)?;
    let metric = ctx0.metric();
    let n = grid.dim();
    let lay = SymLayout::new(n);
    let ns = lay.len();
    let gb = n * ns;
    let nodes = grid.node_count();
    let hdata = hbar.data();
    let trace: Vec<f64> = (0..nodes)
        .map(|p| (0..n).map(|i| hdata[p * ns + lay.slot(i, i)]).sum())
        .collect();
    let dh = grid.gradient(hdata, ns, 0)?;
    let dtr = grid.gradient(&trace, 1, 0)?;
    // λ_k,ij = ½(∂_i h̄_jk + ∂_j h̄_ik − ∂_k h̄_ij) is the variation of Γ̄
    let mut lam = vec![0.0; nodes * gb];
    let mut db = OneFormField::zeros(grid, Repr::Physical).with_level(1);
    let mut dgam = [0.0f64; 4 * 10];
    for &p in grid.region(1) {
        let p = p as usize;
        let d = &dh[p * gb..(p + 1) * gb];
        let hv = &hdata[p * ns..(p + 1) * ns];
        let df = metric.log_gradient_at(p);
        let l = &mut lam[p * gb..(p + 1) * gb];
        for k in 0..n {
            let hf: f64 = (0..n).map(|m| hv[lay.slot(k, m)] * df[m]).sum();
            for m in 0..ns {
                let (i, j) = lay.pair(m);
                let v = 0.5 * (d[i * ns + lay.slot(j, k)] + d[j * ns + lay.slot(i, k)] - d[k * ns + m]);
                l[k * ns + m] = v;
                // δΓ^k_ij = λ_k,ij − h̄_ij f_k + δ_ij (h̄f)_k
                let mut g = v - hv[m] * df[k];
                if i == j {
                    g += hf;
                }
                dgam[k * ns + m] = g;
            }
        }
        let slot = db.at_mut(p);
        for j in 0..n {
            let mut s = -0.5 * dtr[p * n + j];
            for a in 0..n {
                s += dgam[j * ns + lay.slot(a, a)] + dgam[a * ns + lay.slot(a, j)];
            }
            slot[j] = s;
        }
    }
    let dlam = grid.gradient(&lam, gb, 1)?;
    let mut out = ctx0.killing_sym(&db)?;
    out.scale(-1.0);
    let mut a0 = [[0.0f64; 4]; 4];
    let mut da = [[0.0f64; 4]; 4];
    let mut hm = [[0.0f64; 4]; 4];
    let mut r0 = [0.0f64; 256];
    let mut dr = [0.0f64; 256];
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let kn = |h: &[[f64; 4]; 4], k: &[[f64; 4]; 4], a: usize, b: usize, c: usize, d: usize| {
        h[a][c] * k[b][d] + h[b][d] * k[a][c] - h[a][d] * k[b][c] - h[b][c] * k[a][d]
    };
    let mut id = [[0.0f64; 4]; 4];
    for (i, row) in id.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let nm1 = n as f64 - 1.0;
    for &p in grid.region(2) {
        let p = p as usize;
        let e2 = metric.scale_at(p) * metric.scale_at(p);
        let df = metric.log_gradient_at(p);
        let ddf = metric.log_hessian_at(p);
        let hv = &hdata[p * ns..(p + 1) * ns];
        let l = &lam[p * gb..(p + 1) * gb];
        let dl = &dlam[p * n * gb..(p + 1) * n * gb];
        let fsq: f64 = df[..n].iter().map(|v| v * v).sum();
        let mut hff = 0.0;
        for i in 0..n {
            for j in 0..n {
                hm[i][j] = hv[lay.slot(i, j)];
                hff += hm[i][j] * df[i] * df[j];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let m = lay.slot(i, j);
                a0[i][j] = ddf[m] - df[i] * df[j] + 0.5 * fsq * id[i][j];
                let mut v = 0.5 * fsq * hm[i][j] - 0.5 * hff * id[i][j];
                for k in 0..n {
                    v -= l[k * ns + m] * df[k];
                }
                da[i][j] = v;
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let rup = dl[c * gb + a * ns + lay.slot(d, b)] - dl[d * gb + a * ns + lay.slot(c, b)];
                        r0[idx(a, b, c, d)] = -e2 * kn(&id, &a0, a, b, c, d);
                        dr[idx(a, b, c, d)] =
                            e2 * (rup - kn(&hm, &a0, a, b, c, d) - kn(&id, &da, a, b, c, d));
                    }
                }
            }
        }
        let inv_e2 = 1.0 / e2;
        let ric = |b: usize, d: usize| {
            let mut s = 0.0;
            for a in 0..n {
                s += dr[idx(a, b, a, d)];
                for c in 0..n {
                    s -= hm[a][c] * r0[idx(a, b, c, d)];
                }
            }
            inv_e2 * s
        };
        let slot = out.at_mut(p);
        for (m, v) in slot.iter_mut().enumerate() {
            let (i, j) = lay.pair(m);
            *v += 0.5 * (ric(i, j) + ric(j, i)) + nm1 * e2 * hv[m];
        }
    }
    Ok(out)
}

/// `½Δ_L u + (n−1)u`.
pub fn row1_principal(ctx0: &OperatorContext<'_>, u: &SymTensor2Field) -> Result<SymTensor2Field> {
    let mut e1 = ctx0.lichnerowicz(u)?;
    e1.scale(0.5);
    e1.axpy(ctx0.dim() as f64 - 1.0, u)?;
    Ok(e1)
}

/// The block formula `(½Δ_L δh + (n−1)δh − L̊δξ, div L̊δξ)` written with the
/// Lichnerowicz Laplacian, on the same region as [`linearized_apply`].
pub fn linearized_formula(
    ctx0: &OperatorContext<'_>,
    dh: &SymTensor2Field,
    dxi: &OneFormField,
) -> Result<ResidualPair> {
    let grid = ctx0.grid();
    let row2_src = ctx0.conformal_killing(dxi)?;
    let e2 = ctx0.divergence_sym2(&row2_src)?;
    let mut e1 = row1_principal(ctx0, dh)?;
    e1.axpy(-1.0, &row2_src)?;
    let level = e1.level().max(e2.level());
    let mut e1 = e1.with_level(level);
    let mut e2 = e2.with_level(level);
    e1.restrict_to(grid, grid.region(level));
    e2.restrict_to(grid, grid.region(level));
    Ok(ResidualPair { e1, e2 })
}

/// Central difference `[F(x₀ + tδ) − F(x₀ − tδ)] / 2t` of the gauged
/// residual along a physical direction.
#[allow(clippy::too_many_arguments)]
pub fn numeric_jacobian_apply(
    state0: &ConstraintState,
    t0: &SourceTensor,
    dh: &SymTensor2Field,
    dxi: &OneFormField,
    step: f64,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
) -> Result<ResidualPair> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", "must be positive"));
    }
    let dir = ConstraintState::from_physical(grid, bg, dh, dxi)?;
    jacobian_apply_rescaled(state0, t0, &dir, step, bg, grid)
}

pub(crate) fn jacobian_apply_rescaled(
    state0: &ConstraintState,
    t0: &SourceTensor,
    dir: &ConstraintState,
    step: f64,
    bg: &BackgroundGeometry,
    grid: &FieldGrid,
) -> Result<ResidualPair> {
    let plus = residual_gauged(&state0.offset(step, dir)?, t0, bg, grid)?;
    let minus = residual_gauged(&state0.offset(-step, dir)?, t0, bg, grid)?;
    let mut out = plus.difference(&minus)?;
    let inv = 0.5 / step;
    out.e1.scale(inv);
    out.e2.scale(inv);
    Ok(out)
}

/// Number of unknowns: interior nodes times `n(n+1)/2 + n`.
pub fn n_dof(grid: &FieldGrid) -> usize {
    grid.interior_nodes().len() * (sym_len(grid.dim()) + grid.dim())
}

/// Flattens the interior values, all `h̄` first then all `ξ̄`.
pub fn pack(state: &ConstraintState, grid: &FieldGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_dof(grid));
    pack_field(&state.hbar, grid, &mut out);
    pack_field(&state.xibar, grid, &mut out);
    out
}

pub fn unpack(v: &[f64], grid: &FieldGrid) -> Result<ConstraintState> {
    if v.len() != n_dof(grid) {
        return Err(Error::ShapeMismatch(alloc::format!(
            "vector of length {} for {} unknowns",
            v.len(),
            n_dof(grid)
        )));
    }
    let split = grid.interior_nodes().len() * sym_len(grid.dim());
    Ok(ConstraintState {
        hbar: unpack_field(&v[..split], grid, Repr::Rescaled),
        xibar: unpack_field(&v[split..], grid, Repr::Rescaled),
    })
}

pub(crate) fn pack_field<K: FieldKind>(f: &Field<K>, grid: &FieldGrid, out: &mut Vec<f64>) {
    for &p in grid.interior_nodes() {
        out.extend_from_slice(f.at(p as usize));
    }
}

pub(crate) fn unpack_field<K: FieldKind>(v: &[f64], grid: &FieldGrid, repr: Repr) -> Field<K> {
    let mut f = Field::<K>::zeros(grid, repr);
    let nc = f.ncomp();
    for (k, &p) in grid.interior_nodes().iter().enumerate() {
        f.at_mut(p as usize).copy_from_slice(&v[k * nc..(k + 1) * nc]);
    }
    f
}

/// Frame components `(ρ² E1, ρ E2)` on interior nodes, in pack order.
pub fn pack_residual(
    r: &ResidualPair,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_dof(grid));
    pack_field(&r.e1.to_rescaled(grid, bg)?, grid, &mut out);
    pack_field(&r.e2.to_rescaled(grid, bg)?, grid, &mut out);
    Ok(out)
}

/// Inverse of [`pack_residual`].
pub fn unpack_residual(
    v: &[f64],
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
) -> Result<ResidualPair> {
    let s = unpack(v, grid)?;
    let level = crate::grid::MAX_LEVEL.min(2);
    Ok(ResidualPair {
        e1: s.hbar.to_physical(grid, bg)?.with_level(level),
        e2: s.xibar.to_physical(grid, bg)?.with_level(level),
    })
}

/// Weighted residual size used by the solvers: `max(‖E1‖_{0,s}, ‖E2‖_{0,s})`
/// over the interior.
pub fn residual_size(
    r: &ResidualPair,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    s: f64,
) -> Result<f64> {
    r.norm(grid, bg, WeightedNorm::new(s).on(Region::Interior))
}

/// Interior mask helper shared with the solver.
pub(crate) fn interior_vec(grid: &FieldGrid) -> Vec<bool> {
    let mut m = vec![false; grid.node_count()];
    for &p in grid.interior_nodes() {
        m[p as usize] = true;
    }
    m
}
