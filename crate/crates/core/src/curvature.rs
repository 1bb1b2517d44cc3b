//! Connection and curvature of a metric given by its components on the grid.
//!
//! Every metric carries an analytic conformal factor, `g = e^{2f} ḡ`. Finite
//! differences only ever see the compactified components: a covariant rank-r
//! tensor `T` is differentiated as `e^{-rf} T`, and the factor is restored by
//! the product rule. With `f = 0` this is plain differencing of `g_ij`. For
//! asymptotically hyperbolic metrics `e^{-f} = ρ`, so the differenced data
//! stays smooth up to the boundary instead of carrying the `ρ^{-2}` pole.
//!
//! Conventions:
//!
//! ```text
//! Γ^k_ij   = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
//! R^a_bcd  = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
//! R_abcd   = g_ae R^e_bcd,   Ric_bd = R^a_bad,   R = g^bd Ric_bd
//! ```
//!
//! With these signs a space of constant sectional curvature `K` has
//! `R_abcd = K (g_ac g_bd − g_ad g_bc)` and `Ric_ij = g^kl R_ikjl`, which is
//! the contraction pattern the Lichnerowicz Laplacian uses.
//!
//! The curvature of `g` is assembled from that of `ḡ` via
//!
//! ```text
//! R_abcd = e^{2f} (R̄_abcd − (ḡ ⊙ A)_abcd),   A = ∇̄df − df⊗df + ½|df|²_ḡ ḡ
//! (h ⊙ k)_abcd = h_ac k_bd + h_bd k_ac − h_ad k_bc − h_bc k_ad
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::background::BackgroundGeometry;
use crate::error::{Error, Result};
use crate::field::{OneFormField, Repr, ScalarField, SymTensor2Field};
use crate::grid::{norm2, FieldGrid, MAX_LEVEL};
use crate::math::sqrt;
use crate::tensor::{full_len, invert_spd, sym_len, SymLayout};

/// Closed-form conformal factor `e^f` attached to a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalFactor {
    /// `f = 0`: components are differenced directly.
    Unit,
    /// `e^f = 1/ρ = 2/(1 − |x|²)`.
    PoincareBall,
    /// `e^f = 2/(1 + |x|²)`, the stereographic round sphere.
    RoundSphere,
}

impl ConformalFactor {
    /// Writes `[e^f, ∂_i f, ∂_i∂_j f (packed)]` for the point `x`.
    fn eval(self, n: usize, x: &[f64], out: &mut [f64]) {
        let lay = SymLayout::new(n);
        out.iter_mut().for_each(|v| *v = 0.0);
        let r2 = norm2(&x[..n]);
        let (ef, a, b) = match self {
            ConformalFactor::Unit => {
                out[0] = 1.0;
                return;
            }
            ConformalFactor::PoincareBall => {
                // f = −ln ρ: ∂f = x/ρ, ∂∂f = δ/ρ + x x/ρ²
                let rho = 0.5 * (1.0 - r2);
                (1.0 / rho, 1.0 / rho, 1.0 / (rho * rho))
            }
            ConformalFactor::RoundSphere => {
                // f = ln 2 − ln(1+r²): ∂f = −2x/(1+r²), ∂∂f = −2δ/(1+r²) + 4xx/(1+r²)²
                let q = 1.0 + r2;
                (2.0 / q, -2.0 / q, 4.0 / (q * q))
            }
        };
        out[0] = ef;
        for i in 0..n {
            out[1 + i] = a * x[i];
        }
        for k in 0..lay.len() {
            let (i, j) = lay.pair(k);
            let d = if i == j { 1.0 } else { 0.0 };
            out[1 + n + k] = a * d + b * x[i] * x[j];
        }
    }
}

/// Metric components with cached inverse, volume density and the compactified
/// representation.
#[derive(Debug, Clone)]
pub struct MetricField {
    comps: SymTensor2Field,
    compact: Vec<f64>,
    inverse: Vec<f64>,
    sqrt_det: Vec<f64>,
    factor: ConformalFactor,
    // per node: e^f, ∂f (n), ∂∂f (packed)
    conf: Vec<f64>,
    checksum: u64,
}

impl MetricField {
    /// Plain metric, differenced directly (`f = 0`).
    pub fn new(grid: &FieldGrid, comps: SymTensor2Field) -> Result<Self> {
        Self::with_factor(grid, comps, ConformalFactor::Unit)
    }

    /// Physical components together with the factor used for differencing.
    pub fn with_factor(
        grid: &FieldGrid,
        comps: SymTensor2Field,
        factor: ConformalFactor,
    ) -> Result<Self> {
        comps.check_grid(grid)?;
        comps.require(Repr::Physical)?;
        let conf = conformal_table(grid, factor);
        let ns = sym_len(grid.dim());
        let cw = conf_width(grid.dim());
        let mut compact = vec![0.0; grid.node_count() * ns];
        for &p in grid.region(0) {
            let p = p as usize;
            let e2 = 1.0 / (conf[p * cw] * conf[p * cw]);
            for (c, v) in compact[p * ns..(p + 1) * ns].iter_mut().zip(comps.at(p)) {
                *c = e2 * v;
            }
        }
        Self::assemble(grid, comps, compact, factor, conf)
    }

    /// Builds `g = e^{2f} ḡ` from packed compactified components `ḡ`.
    pub fn from_compact(
        grid: &FieldGrid,
        compact: SymTensor2Field,
        factor: ConformalFactor,
    ) -> Result<Self> {
        compact.check_grid(grid)?;
        let conf = conformal_table(grid, factor);
        let ns = sym_len(grid.dim());
        let cw = conf_width(grid.dim());
        let mut comps = SymTensor2Field::zeros(grid, Repr::Physical);
        for &p in grid.region(0) {
            let p = p as usize;
            let e2 = conf[p * cw] * conf[p * cw];
            for (c, v) in comps.at_mut(p).iter_mut().zip(compact.at(p)) {
                *c = e2 * v;
            }
        }
        let mut packed = compact.into_data();
        for p in 0..grid.node_count() {
            if !grid.in_region(0, p) {
                packed[p * ns..(p + 1) * ns].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Self::assemble(grid, comps, packed, factor, conf)
    }

    fn assemble(
        grid: &FieldGrid,
        comps: SymTensor2Field,
        compact: Vec<f64>,
        factor: ConformalFactor,
        conf: Vec<f64>,
    ) -> Result<Self> {
        let lay = SymLayout::new(grid.dim());
        let ns = lay.len();
        let mut inverse = vec![0.0; grid.node_count() * ns];
        let mut sqrt_det = vec![0.0; grid.node_count()];
        for &p in grid.region(0) {
            let p = p as usize;
            let (inv, det) = invert_spd(&lay, comps.at(p)).ok_or_else(|| {
                Error::NotPositiveDefinite {
                    node: p,
                    coords: grid.coords(p)[..grid.dim()].to_vec(),
                }
            })?;
            if !det.is_finite() || inv[..ns].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "metric",
                    node: p,
                });
            }
            inverse[p * ns..(p + 1) * ns].copy_from_slice(&inv[..ns]);
            sqrt_det[p] = sqrt(det);
        }
        let checksum = checksum(comps.data(), factor);
        Ok(MetricField {
            comps: comps.with_level(0),
            compact,
            inverse,
            sqrt_det,
            factor,
            conf,
            checksum,
        })
    }

    /// The Poincaré ball metric on region 0.
    pub fn background(grid: &FieldGrid, _bg: &BackgroundGeometry) -> Self {
        let lay = SymLayout::new(grid.dim());
        let delta = SymTensor2Field::from_fn(grid, Repr::Rescaled, |_, out| {
            for a in 0..lay.dim() {
                out[lay.slot(a, a)] = 1.0;
            }
        });
        MetricField::from_compact(grid, delta, ConformalFactor::PoincareBall)
            .expect("Poincaré metric is positive definite inside the halo")
    }

    /// `g0 + h` for a perturbation `h` in either representation.
    pub fn perturbed(
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
        h: &SymTensor2Field,
    ) -> Result<Self> {
        h.check_grid(grid)?;
        let hbar = match h.repr() {
            Repr::Rescaled => h.clone(),
            Repr::Physical => h.to_rescaled(grid, bg)?,
        };
        let lay = SymLayout::new(grid.dim());
        let mut gbar = hbar.with_level(0);
        for &p in grid.region(0) {
            let slot = gbar.at_mut(p as usize);
            for a in 0..lay.dim() {
                slot[lay.slot(a, a)] += 1.0;
            }
        }
        MetricField::from_compact(grid, gbar, ConformalFactor::PoincareBall)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.dim()
    }

    pub fn comps(&self) -> &SymTensor2Field {
        &self.comps
    }

    pub fn factor(&self) -> ConformalFactor {
        self.factor
    }

    /// Packed `ḡ_ij = e^{-2f} g_ij` at a node.
    #[inline]
    pub fn compact_at(&self, node: usize) -> &[f64] {
        let ns = sym_len(self.dim());
        &self.compact[node * ns..(node + 1) * ns]
    }

    /// Packed `g^{ij}` at a node.
    #[inline]
    pub fn inverse_at(&self, node: usize) -> &[f64] {
        let ns = sym_len(self.dim());
        &self.inverse[node * ns..(node + 1) * ns]
    }

    #[inline]
    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    /// `e^f` at a node.
    #[inline]
    pub fn scale_at(&self, node: usize) -> f64 {
        self.conf[node * conf_width(self.dim())]
    }

    /// `∂_i f` at a node.
    #[inline]
    pub fn log_gradient_at(&self, node: usize) -> &[f64] {
        let n = self.dim();
        let b = node * conf_width(n);
        &self.conf[b + 1..b + 1 + n]
    }

    #[inline]
    pub(crate) fn log_hessian_at(&self, node: usize) -> &[f64] {
        let n = self.dim();
        let b = node * conf_width(n);
        &self.conf[b + 1 + n..b + conf_width(n)]
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// `Tr_g u = g^{ij} u_ij` for a physical symmetric tensor, on the region
    /// where `u` is valid.
    pub fn trace(&self, grid: &FieldGrid, u: &SymTensor2Field) -> Result<ScalarField> {
        u.check_grid(grid)?;
        u.require(Repr::Physical)?;
        let lay = SymLayout::new(grid.dim());
        let mut out = ScalarField::zeros(grid, Repr::Physical).with_level(u.level());
        for &p in grid.region(u.level()) {
            let p = p as usize;
            out.at_mut(p)[0] = sym_contract(&lay, self.inverse_at(p), u.at(p));
        }
        Ok(out)
    }

    /// First derivatives of a physical covariant rank-`rank` tensor over
    /// region `level + 1`, laid out `[node][axis][comp]`. The difference
    /// stencil acts on `e^{-rank·f} T`.
    pub(crate) fn weighted_gradient(
        &self,
        grid: &FieldGrid,
        data: &[f64],
        ncomp: usize,
        rank: usize,
        level: usize,
    ) -> Result<Vec<f64>> {
        if level >= MAX_LEVEL {
            return Err(Error::MarginViolation {
                needed: level + 1,
                available: MAX_LEVEL,
            });
        }
        if rank == 0 || self.factor == ConformalFactor::Unit {
            return grid.gradient(data, ncomp, level);
        }
        let n = grid.dim();
        let mut scaled = vec![0.0; data.len()];
        for &p in grid.region(level) {
            let p = p as usize;
            let w = powi(self.scale_at(p), rank).recip();
            for (s, v) in scaled[p * ncomp..(p + 1) * ncomp]
                .iter_mut()
                .zip(&data[p * ncomp..(p + 1) * ncomp])
            {
                *s = w * v;
            }
        }
        let mut out = grid.gradient(&scaled, ncomp, level)?;
        let r = rank as f64;
        let block = n * ncomp;
        for &p in grid.region(level + 1) {
            let p = p as usize;
            let w = powi(self.scale_at(p), rank);
            let df = self.log_gradient_at(p);
            let tb = &scaled[p * ncomp..(p + 1) * ncomp];
            let o = &mut out[p * block..(p + 1) * block];
            for a in 0..n {
                let ra = r * df[a];
                for c in 0..ncomp {
                    o[a * ncomp + c] = w * (o[a * ncomp + c] + ra * tb[c]);
                }
            }
        }
        Ok(out)
    }
}

#[inline]
fn conf_width(n: usize) -> usize {
    1 + n + sym_len(n)
}

#[inline]
fn powi(x: f64, k: usize) -> f64 {
    let mut v = 1.0;
    for _ in 0..k {
        v *= x;
    }
    v
}

fn conformal_table(grid: &FieldGrid, factor: ConformalFactor) -> Vec<f64> {
    let n = grid.dim();
    let cw = conf_width(n);
    let mut conf = vec![0.0; grid.node_count() * cw];
    for p in 0..grid.node_count() {
        if grid.in_region(0, p) {
            factor.eval(n, &grid.coords(p), &mut conf[p * cw..(p + 1) * cw]);
        } else {
            conf[p * cw] = 1.0;
        }
    }
    conf
}

/// `Σ_ij a^ij b_ij` for two packed symmetric tensors.
#[inline]
pub(crate) fn sym_contract(lay: &SymLayout, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..lay.len() {
        let (i, j) = lay.pair(k);
        let m = if i == j { 1.0 } else { 2.0 };
        s += m * a[k] * b[k];
    }
    s
}

fn checksum(data: &[f64], factor: ConformalFactor) -> u64 {
    // FNV-1a over the bit patterns
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ factor as u64;
    for v in data {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// `Γ^k_ij` per node, stored as `[k][sym(i,j)]`; valid on region 1.
#[derive(Debug, Clone)]
pub struct ChristoffelField {
    dim: usize,
    data: Vec<f64>,
    // Christoffel symbols of ḡ when the factor is not the unit
    compact: Option<Vec<f64>>,
    checksum: u64,
}

impl ChristoffelField {
    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let b = self.dim * sym_len(self.dim);
        &self.data[node * b..(node + 1) * b]
    }

    /// `Γ^k_ij` at a node.
    #[inline]
    pub fn get(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let lay = SymLayout::new(self.dim);
        self.at(node)[k * lay.len() + lay.slot(i, j)]
    }

    pub fn level(&self) -> usize {
        1
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    fn compact_data(&self) -> &[f64] {
        self.compact.as_deref().unwrap_or(&self.data)
    }
}

pub fn christoffel(metric: &MetricField, grid: &FieldGrid) -> Result<ChristoffelField> {
    let n = grid.dim();
    let lay = SymLayout::new(n);
    let ns = lay.len();
    let dg = grid.gradient(&metric.compact, ns, 0)?;
    let block = n * ns;
    let unit = metric.factor() == ConformalFactor::Unit;
    let mut bar = vec![0.0; grid.node_count() * block];
    let mut full = if unit { Vec::new() } else { vec![0.0; grid.node_count() * block] };
    let mut lowered = [0.0f64; 4 * 10];
    for &p in grid.region(1) {
        let p = p as usize;
        let d = &dg[p * block..(p + 1) * block];
        let dgv = |axis: usize, i: usize, j: usize| d[axis * ns + lay.slot(i, j)];
        // Γ̄_l,ij = ½ (∂_i ḡ_jl + ∂_j ḡ_il − ∂_l ḡ_ij)
        for l in 0..n {
            for k in 0..ns {
                let (i, j) = lay.pair(k);
                lowered[l * ns + k] = 0.5 * (dgv(i, j, l) + dgv(j, i, l) - dgv(l, i, j));
            }
        }
        // ḡ^{-1} = e^{2f} g^{-1}
        let e2 = metric.scale_at(p) * metric.scale_at(p);
        let ginv = metric.inverse_at(p);
        let out = &mut bar[p * block..(p + 1) * block];
        for kk in 0..n {
            for k in 0..ns {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[lay.slot(kk, l)] * lowered[l * ns + k];
                }
                out[kk * ns + k] = e2 * s;
            }
        }
        if unit {
            continue;
        }
        // Γ = Γ̄ + δ^k_i f_j + δ^k_j f_i − ḡ_ij ḡ^kl f_l
        let df = metric.log_gradient_at(p);
        let gb = metric.compact_at(p);
        let mut up = [0.0f64; 4];
        for k in 0..n {
            up[k] = e2 * (0..n).map(|l| ginv[lay.slot(k, l)] * df[l]).sum::<f64>();
        }
        let dst = &mut full[p * block..(p + 1) * block];
        for kk in 0..n {
            for k in 0..ns {
                let (i, j) = lay.pair(k);
                let mut c = -gb[k] * up[kk];
                if kk == i {
                    c += df[j];
                }
                if kk == j {
                    c += df[i];
                }
                dst[kk * ns + k] = out[kk * ns + k] + c;
            }
        }
    }
    let (data, compact) = if unit { (bar, None) } else { (full, Some(bar)) };
    Ok(ChristoffelField {
        dim: n,
        data,
        compact,
        checksum: metric.checksum(),
    })
}

/// Riemann, Ricci and scalar curvature; valid on region 2.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    dim: usize,
    /// `R_abcd` for `c < d`, stored `[a][b][pair(c,d)]`.
    riemann: Option<Vec<f64>>,
    ricci: SymTensor2Field,
    scalar: ScalarField,
    checksum: u64,
}

#[inline]
fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

#[inline]
fn pair_slot(n: usize, c: usize, d: usize) -> usize {
    // c < d, row-major over the strict upper triangle
    c * n - c * (c + 1) / 2 + (d - c - 1)
}

impl CurvatureBundle {
    pub fn ricci(&self) -> &SymTensor2Field {
        &self.ricci
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.scalar
    }

    pub fn has_riemann(&self) -> bool {
        self.riemann.is_some()
    }

    pub fn level(&self) -> usize {
        2
    }

    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// `R_abcd` at a node; requires a bundle built with the Riemann tensor.
    pub fn riemann(&self, node: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        let r = self.riemann.as_ref().expect("bundle built without Riemann tensor");
        let np = pair_count(n);
        let base = node * n * n * np + (a * n + b) * np;
        match c.cmp(&d) {
            core::cmp::Ordering::Less => r[base + pair_slot(n, c, d)],
            core::cmp::Ordering::Greater => -r[base + pair_slot(n, d, c)],
            core::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Full `R_abcd` at a node, row-major `n^4`.
    pub fn riemann_full(&self, node: usize, out: &mut [f64]) {
        let n = self.dim;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        out[((a * n + b) * n + c) * n + d] = self.riemann(node, a, b, c, d);
                    }
                }
            }
        }
    }
}

/// Full curvature stack including the Riemann tensor.
pub fn curvature_bundle(
    metric: &MetricField,
    chris: &ChristoffelField,
    grid: &FieldGrid,
) -> Result<CurvatureBundle> {
    curvature_impl(metric, chris, grid, true)
}

/// Ricci and scalar curvature only.
pub fn ricci_bundle(
    metric: &MetricField,
    chris: &ChristoffelField,
    grid: &FieldGrid,
) -> Result<CurvatureBundle> {
    curvature_impl(metric, chris, grid, false)
}

fn curvature_impl(
    metric: &MetricField,
    chris: &ChristoffelField,
    grid: &FieldGrid,
    with_riemann: bool,
) -> Result<CurvatureBundle> {
    if chris.checksum() != metric.checksum() {
        return Err(Error::ShapeMismatch("Christoffel symbols belong to a different metric".into()));
    }
    if MAX_LEVEL < 2 {
        return Err(Error::MarginViolation {
            needed: 2,
            available: MAX_LEVEL,
        });
    }
    let n = grid.dim();
    let lay = SymLayout::new(n);
    let ns = lay.len();
    let gblock = n * ns;
    let np = pair_count(n);
    let n4 = full_len(n, 4);
    let unit = metric.factor() == ConformalFactor::Unit;
    let bar = chris.compact_data();
    let mut riemann = with_riemann.then(|| vec![0.0; grid.node_count() * n * n * np]);
    let mut ricci = SymTensor2Field::zeros(grid, Repr::Physical).with_level(2);
    let mut scalar = ScalarField::zeros(grid, Repr::Physical).with_level(2);
    let mut dgam = vec![0.0; n * gblock];
    let mut rup = vec![0.0; n4];
    let mut rdown = vec![0.0; n4];
    let mut ric_full = [0.0f64; 16];
    let mut amat = [[0.0f64; 4]; 4];
    let mut gbm = [[0.0f64; 4]; 4];
    for &p in grid.region(2) {
        let p = p as usize;
        grid.gradient_at(bar, gblock, 1, p, &mut dgam);
        let gam = &bar[p * gblock..(p + 1) * gblock];
        let g = |k: usize, i: usize, j: usize| gam[k * ns + lay.slot(i, j)];
        let dg = |c: usize, k: usize, i: usize, j: usize| dgam[c * gblock + k * ns + lay.slot(i, j)];
        // R̄^a_bcd
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in (c + 1)..n {
                        let mut v = dg(c, a, d, b) - dg(d, a, c, b);
                        for e in 0..n {
                            v += g(a, c, e) * g(e, d, b) - g(a, d, e) * g(e, c, b);
                        }
                        rup[((a * n + b) * n + c) * n + d] = v;
                    }
                }
            }
        }
        let gb = metric.compact_at(p);
        for i in 0..n {
            for j in 0..n {
                gbm[i][j] = gb[lay.slot(i, j)];
            }
        }
        let e2 = metric.scale_at(p) * metric.scale_at(p);
        if !unit {
            let df = metric.log_gradient_at(p);
            let ddf = metric.log_hessian_at(p);
            let ginv = metric.inverse_at(p);
            let mut dfsq = 0.0;
            for k in 0..n {
                for l in 0..n {
                    dfsq += e2 * ginv[lay.slot(k, l)] * df[k] * df[l];
                }
            }
            for i in 0..n {
                for j in i..n {
                    let mut v = ddf[lay.slot(i, j)] - df[i] * df[j] + 0.5 * dfsq * gbm[i][j];
                    for k in 0..n {
                        v -= g(k, i, j) * df[k];
                    }
                    amat[i][j] = v;
                    amat[j][i] = v;
                }
            }
        }
        // R_abcd for c < d, then antisymmetric fill
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    rdown[((a * n + b) * n + c) * n + c] = 0.0;
                    for d in (c + 1)..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += gbm[a][e] * rup[((e * n + b) * n + c) * n + d];
                        }
                        if !unit {
                            s -= gbm[a][c] * amat[b][d] + gbm[b][d] * amat[a][c]
                                - gbm[a][d] * amat[b][c]
                                - gbm[b][c] * amat[a][d];
                        }
                        let v = e2 * s;
                        rdown[((a * n + b) * n + c) * n + d] = v;
                        rdown[((a * n + b) * n + d) * n + c] = -v;
                    }
                }
            }
        }
        // Ric_bd = g^ac R_abcd
        let ginv = metric.inverse_at(p);
        for b in 0..n {
            for d in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        s += ginv[lay.slot(a, c)] * rdown[((a * n + b) * n + c) * n + d];
                    }
                }
                ric_full[b * n + d] = s;
            }
        }
        let ric = ricci.at_mut(p);
        for k in 0..ns {
            let (i, j) = lay.pair(k);
            ric[k] = 0.5 * (ric_full[i * n + j] + ric_full[j * n + i]);
        }
        scalar.at_mut(p)[0] = sym_contract(&lay, ginv, ric);
        if let Some(riem) = riemann.as_mut() {
            let base = p * n * n * np;
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in (c + 1)..n {
                            riem[base + (a * n + b) * np + pair_slot(n, c, d)] =
                                rdown[((a * n + b) * n + c) * n + d];
                        }
                    }
                }
            }
        }
    }
    Ok(CurvatureBundle {
        dim: n,
        riemann,
        ricci,
        scalar,
        checksum: metric.checksum(),
    })
}

/// General covariant tensor with all `n^rank` components stored, last index
/// fastest. Derivative indices are prepended.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    rank: usize,
    level: usize,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: &FieldGrid, rank: usize, level: usize) -> Self {
        TensorField {
            dim: grid.dim(),
            rank,
            level,
            data: vec![0.0; grid.node_count() * full_len(grid.dim(), rank)],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn level(&self) -> usize {
        self.level
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        full_len(self.dim, self.rank)
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[node * nc..(node + 1) * nc]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let nc = self.ncomp();
        &mut self.data[node * nc..(node + 1) * nc]
    }

    /// Component with the given index tuple.
    pub fn get(&self, node: usize, idx: &[usize]) -> f64 {
        let mut k = 0;
        for &i in idx {
            k = k * self.dim + i;
        }
        self.at(node)[k]
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        TensorField {
            dim: f.dim(),
            rank: 0,
            level: f.level(),
            data: f.data().to_vec(),
        }
    }

    pub fn from_one_form(w: &OneFormField) -> Self {
        TensorField {
            dim: w.dim(),
            rank: 1,
            level: w.level(),
            data: w.data().to_vec(),
        }
    }

    pub fn from_sym2(u: &SymTensor2Field) -> Self {
        Self::from_sym_data(u.dim(), u.level(), u.data())
    }

    pub(crate) fn from_sym_data(n: usize, level: usize, packed: &[f64]) -> Self {
        let lay = SymLayout::new(n);
        let nodes = packed.len() / lay.len();
        let mut data = vec![0.0; nodes * n * n];
        for p in 0..nodes {
            lay.unpack(
                &packed[p * lay.len()..(p + 1) * lay.len()],
                &mut data[p * n * n..(p + 1) * n * n],
            );
        }
        TensorField {
            dim: n,
            rank: 2,
            level,
            data,
        }
    }

    pub(crate) fn from_raw(dim: usize, rank: usize, level: usize, data: Vec<f64>) -> Self {
        TensorField {
            dim,
            rank,
            level,
            data,
        }
    }

    /// Symmetric part of a rank-2 tensor.
    pub fn symmetrize(&self, grid: &FieldGrid) -> Result<SymTensor2Field> {
        if self.rank != 2 {
            return Err(Error::ShapeMismatch(alloc::format!("symmetrize on rank {}", self.rank)));
        }
        let lay = SymLayout::new(self.dim);
        let mut out = SymTensor2Field::zeros(grid, Repr::Physical).with_level(self.level);
        for &p in grid.region(self.level) {
            let p = p as usize;
            lay.pack(self.at(p), out.at_mut(p));
        }
        Ok(out)
    }

    pub fn into_one_form(self, grid: &FieldGrid) -> Result<OneFormField> {
        if self.rank != 1 {
            return Err(Error::ShapeMismatch(alloc::format!("one-form from rank {}", self.rank)));
        }
        OneFormField::from_data(grid, Repr::Physical, self.level, self.data)
    }

    pub fn into_scalar(self, grid: &FieldGrid) -> Result<ScalarField> {
        if self.rank != 0 {
            return Err(Error::ShapeMismatch(alloc::format!("scalar from rank {}", self.rank)));
        }
        ScalarField::from_data(grid, Repr::Physical, self.level, self.data)
    }
}

/// `(∇T)_{a i1..ir} = ∂_a T_{i1..ir} − Σ_p Γ^l_{a i_p} T_{i1..l..ir}`.
pub fn covariant_derivative(
    grid: &FieldGrid,
    metric: &MetricField,
    chris: &ChristoffelField,
    t: &TensorField,
) -> Result<TensorField> {
    if chris.checksum() != metric.checksum() {
        return Err(Error::ShapeMismatch("Christoffel symbols belong to a different metric".into()));
    }
    let level = t.level;
    if level + 1 > MAX_LEVEL {
        return Err(Error::MarginViolation {
            needed: level + 1,
            available: MAX_LEVEL,
        });
    }
    let n = grid.dim();
    let ns = sym_len(n);
    let r = t.rank;
    let nc = t.ncomp();
    let mut out = TensorField::zeros(grid, r + 1, level + 1);
    let grad_all = metric.weighted_gradient(grid, &t.data, nc, r, level)?;
    let mut place = [0usize; 8];
    for pos in 0..r {
        place[pos] = full_len(n, r - 1 - pos);
    }
    for &p in grid.region(level + 1) {
        let p = p as usize;
        let grad = &grad_all[p * n * nc..(p + 1) * n * nc];
        let tv = t.at(p);
        let gam = chris.at(p);
        let slot = out.at_mut(p);
        slot.copy_from_slice(grad);
        if r == 0 {
            continue;
        }
        for a in 0..n {
            for idx in 0..nc {
                let mut corr = 0.0;
                for pos in 0..r {
                    let ip = (idx / place[pos]) % n;
                    let base = idx - ip * place[pos];
                    for l in 0..n {
                        let (lo, hi) = if a <= ip { (a, ip) } else { (ip, a) };
                        let gk = gam[l * ns + sym_slot(n, lo, hi)];
                        corr += gk * tv[base + l * place[pos]];
                    }
                }
                slot[a * nc + idx] -= corr;
            }
        }
    }
    Ok(out)
}

#[inline]
fn sym_slot(n: usize, i: usize, j: usize) -> usize {
    // packed upper-triangle slot, i <= j
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// `∇_i ω_j` as a rank-2 tensor.
pub fn cov_deriv_oneform(
    grid: &FieldGrid,
    metric: &MetricField,
    chris: &ChristoffelField,
    w: &OneFormField,
) -> Result<TensorField> {
    w.check_grid(grid)?;
    w.require(Repr::Physical)?;
    covariant_derivative(grid, metric, chris, &TensorField::from_one_form(w))
}

/// `∇_k u_ij` as a rank-3 tensor, derivative index first.
pub fn cov_deriv_sym2(
    grid: &FieldGrid,
    metric: &MetricField,
    chris: &ChristoffelField,
    u: &SymTensor2Field,
) -> Result<TensorField> {
    u.check_grid(grid)?;
    u.require(Repr::Physical)?;
    covariant_derivative(grid, metric, chris, &TensorField::from_sym2(u))
}
