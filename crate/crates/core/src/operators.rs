//! Linear differential operators over a fixed metric.
//!
//! Sign conventions:
//!
//! * `Δ = −tr ∇²` (non-negative), so on flat space `Δf = −Σ ∂²f`.
//! * `(div u)_i = −∇^j u_ji`, `d*ω = −∇^i ω_i`.
//! * `(Lω)_ij = ½(∇_i ω_j + ∇_j ω_i)`, `L̊ω = Lω + (1/n)(d*ω) g`.
//! * `Δ_L u = Δu + 2(Ric∘u − Riem∘u)` with
//!   `(Ric∘u)_ij = ½(Ric_ik u^k_j + Ric_jk u^k_i)` and
//!   `(Riem∘u)_ij = R_ikjl u^kl`.
//! * `B_g(h) = div_g h + ½ d(Tr_g h)`.
//!
//! Each operator reports its result on the region where all inputs were
//! valid after the derivative passes it performs.

use alloc::vec;

use crate::background::BackgroundGeometry;
use crate::curvature::{
    christoffel, covariant_derivative, curvature_bundle, ricci_bundle, sym_contract,
    ChristoffelField, CurvatureBundle, MetricField, TensorField,
};
use crate::error::{Error, Result};
use crate::field::{Field, FieldKind, OneFormField, Repr, ScalarField, SymTensor2Field};
use crate::grid::{FieldGrid, MAX_LEVEL};
use crate::tensor::{full_len, SymLayout};

/// One metric together with its connection and curvature.
#[derive(Debug, Clone)]
pub struct OperatorContext<'g> {
    grid: &'g FieldGrid,
    metric: MetricField,
    chris: ChristoffelField,
    curv: CurvatureBundle,
}

impl<'g> OperatorContext<'g> {
    /// Builds the connection and the full curvature stack of `metric`.
    pub fn new(grid: &'g FieldGrid, metric: MetricField) -> Result<Self> {
        let chris = christoffel(&metric, grid)?;
        let curv = curvature_bundle(&metric, &chris, grid)?;
        Ok(OperatorContext {
            grid,
            metric,
            chris,
            curv,
        })
    }

    /// Like [`OperatorContext::new`] but without the Riemann tensor; the
    /// Lichnerowicz Laplacian is unavailable on such a context.
    pub fn without_riemann(grid: &'g FieldGrid, metric: MetricField) -> Result<Self> {
        let chris = christoffel(&metric, grid)?;
        let curv = ricci_bundle(&metric, &chris, grid)?;
        Ok(OperatorContext {
            grid,
            metric,
            chris,
            curv,
        })
    }

    pub fn from_parts(
        grid: &'g FieldGrid,
        metric: MetricField,
        chris: ChristoffelField,
        curv: CurvatureBundle,
    ) -> Result<Self> {
        if chris.checksum() != metric.checksum() || curv.checksum() != metric.checksum() {
            return Err(Error::ShapeMismatch("context parts come from different metrics".into()));
        }
        Ok(OperatorContext {
            grid,
            metric,
            chris,
            curv,
        })
    }

    /// Context of the Poincaré ball metric.
    pub fn background(grid: &'g FieldGrid, bg: &BackgroundGeometry) -> Result<Self> {
        Self::new(grid, MetricField::background(grid, bg))
    }

    pub fn grid(&self) -> &'g FieldGrid {
        self.grid
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn christoffel(&self) -> &ChristoffelField {
        &self.chris
    }

    pub fn curvature(&self) -> &CurvatureBundle {
        &self.curv
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn check<K: FieldKind>(&self, f: &Field<K>) -> Result<()> {
        f.check_grid(self.grid)?;
        f.require(Repr::Physical)
    }

    fn check_depth(&self, level: usize) -> Result<()> {
        if level > MAX_LEVEL {
            return Err(Error::MarginViolation {
                needed: level,
                available: MAX_LEVEL,
            });
        }
        Ok(())
    }

    pub(crate) fn nabla(&self, t: &TensorField) -> Result<TensorField> {
        self.check_depth(t.level() + 1)?;
        covariant_derivative(self.grid, &self.metric, &self.chris, t)
    }

    /// `g^{ab} T_{ab…}`: contracts the first two indices.
    pub(crate) fn trace_leading(&self, t: &TensorField) -> TensorField {
        let n = self.dim();
        let lay = SymLayout::new(n);
        let rest = full_len(n, t.rank() - 2);
        let mut out = TensorField::zeros(self.grid, t.rank() - 2, t.level());
        for &p in self.grid.region(t.level()) {
            let p = p as usize;
            let ginv = self.metric.inverse_at(p);
            let src = t.at(p);
            let dst = out.at_mut(p);
            for a in 0..n {
                for b in 0..n {
                    let gab = ginv[lay.slot(a, b)];
                    let off = (a * n + b) * rest;
                    for (d, s) in dst.iter_mut().zip(&src[off..off + rest]) {
                        *d += gab * s;
                    }
                }
            }
        }
        out
    }

    fn laplacian_tensor(&self, t: &TensorField) -> Result<TensorField> {
        let second = self.nabla(&self.nabla(t)?)?;
        let mut out = self.trace_leading(&second);
        for &p in self.grid.region(out.level()) {
            out.at_mut(p as usize).iter_mut().for_each(|v| *v = -*v);
        }
        Ok(out)
    }

    /// Rough Laplacian `Δ = ∇*∇` on scalars, one-forms or symmetric 2-tensors.
    pub fn laplacian<K: FieldKind>(&self, f: &Field<K>) -> Result<Field<K>> {
        self.check(f)?;
        let t = self.laplacian_tensor(&to_tensor(f))?;
        from_tensor(self.grid, t)
    }

    fn ricci_action(&self, u: &SymTensor2Field, p: usize, lay: &SymLayout, out: &mut [f64]) {
        // (Ric∘u)_ij = ½(Ric_ik u^k_j + Ric_jk u^k_i), u^k_j = g^kl u_lj
        let n = lay.dim();
        let ginv = self.metric.inverse_at(p);
        let ric = self.curv.ricci().at(p);
        let uv = u.at(p);
        let mut mixed = [[0.0f64; 4]; 4]; // mixed[k][j] = u^k_j
        for k in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[lay.slot(k, l)] * uv[lay.slot(l, j)];
                }
                mixed[k][j] = s;
            }
        }
        for m in 0..lay.len() {
            let (i, j) = lay.pair(m);
            let mut s = 0.0;
            for k in 0..n {
                s += ric[lay.slot(i, k)] * mixed[k][j] + ric[lay.slot(j, k)] * mixed[k][i];
            }
            out[m] = 0.5 * s;
        }
    }

    fn riemann_action(&self, u: &SymTensor2Field, p: usize, lay: &SymLayout, out: &mut [f64]) {
        // (Riem∘u)_ij = R_ikjl u^kl
        let n = lay.dim();
        let ginv = self.metric.inverse_at(p);
        let uv = u.at(p);
        let mut up = [[0.0f64; 4]; 4];
        for k in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += ginv[lay.slot(k, a)] * ginv[lay.slot(l, b)] * uv[lay.slot(a, b)];
                    }
                }
                up[k][l] = s;
            }
        }
        for m in 0..lay.len() {
            let (i, j) = lay.pair(m);
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.curv.riemann(p, i, k, j, l) * up[k][l];
                }
            }
            out[m] = s;
        }
    }

    /// `Δ_L u = Δu + 2(Ric∘u − Riem∘u)`.
    pub fn lichnerowicz(&self, u: &SymTensor2Field) -> Result<SymTensor2Field> {
        self.check(u)?;
        if !self.curv.has_riemann() {
            return Err(Error::ShapeMismatch("context was built without the Riemann tensor".into()));
        }
        let mut out = self.laplacian(u)?;
        let level = out.level().max(self.curv.level());
        let lay = SymLayout::new(self.dim());
        let mut ric = [0.0; 10];
        let mut riem = [0.0; 10];
        for &p in self.grid.region(level) {
            let p = p as usize;
            self.ricci_action(u, p, &lay, &mut ric);
            self.riemann_action(u, p, &lay, &mut riem);
            let slot = out.at_mut(p);
            for m in 0..lay.len() {
                slot[m] += 2.0 * (ric[m] - riem[m]);
            }
        }
        let mut out = out.with_level(level);
        out.restrict_to(self.grid, self.grid.region(level));
        Ok(out)
    }

    /// `(div u)_i = −g^{jk} ∇_k u_ji`.
    pub fn divergence_sym2(&self, u: &SymTensor2Field) -> Result<OneFormField> {
        self.check(u)?;
        let du = self.nabla(&TensorField::from_sym2(u))?;
        let mut out = self.trace_leading(&du);
        for &p in self.grid.region(out.level()) {
            out.at_mut(p as usize).iter_mut().for_each(|v| *v = -*v);
        }
        out.into_one_form(self.grid)
    }

    /// `d*ω = −g^{ij} ∇_i ω_j`.
    pub fn codifferential(&self, w: &OneFormField) -> Result<ScalarField> {
        self.check(w)?;
        let dw = self.nabla(&TensorField::from_one_form(w))?;
        let mut out = self.trace_leading(&dw);
        for &p in self.grid.region(out.level()) {
            out.at_mut(p as usize).iter_mut().for_each(|v| *v = -*v);
        }
        out.into_scalar(self.grid)
    }

    /// `(Lω)_ij = ½(∇_i ω_j + ∇_j ω_i)`.
    pub fn killing_sym(&self, w: &OneFormField) -> Result<SymTensor2Field> {
        self.check(w)?;
        self.nabla(&TensorField::from_one_form(w))?.symmetrize(self.grid)
    }

    /// `L̊ω = Lω + (1/n)(d*ω) g`; trace-free by construction.
    pub fn conformal_killing(&self, w: &OneFormField) -> Result<SymTensor2Field> {
        self.check(w)?;
        let dw = self.nabla(&TensorField::from_one_form(w))?;
        let mut out = dw.symmetrize(self.grid)?;
        let lay = SymLayout::new(self.dim());
        let inv_n = 1.0 / self.dim() as f64;
        for &p in self.grid.region(out.level()) {
            let p = p as usize;
            let g = self.metric.comps().at(p);
            let slot = out.at_mut(p);
            // d*ω = −g^ij (Lω)_ij, taken from the stored symmetric part so the
            // trace cancels to rounding
            let codiff = -sym_contract(&lay, self.metric.inverse_at(p), slot);
            for (m, v) in slot.iter_mut().enumerate() {
                *v += inv_n * codiff * g[m];
            }
        }
        Ok(out)
    }

    /// `B_g(h) = div_g h + ½ d(Tr_g h)`.
    pub fn gauge_b(&self, h: &SymTensor2Field) -> Result<OneFormField> {
        self.check(h)?;
        let mut div = self.divergence_sym2(h)?;
        let tr = self.metric.trace(self.grid, h)?;
        let dtr = self.grid.gradient(tr.data(), 1, tr.level())?;
        for &p in self.grid.region(div.level()) {
            let p = p as usize;
            let n = self.dim();
            let slot = div.at_mut(p);
            for a in 0..n {
                slot[a] += 0.5 * dtr[p * n + a];
            }
        }
        Ok(div)
    }

    /// `(Ric·ω)_j = g^{kl} Ric_jl ω_k` on region 2.
    pub fn ricci_dot(&self, w: &OneFormField) -> Result<OneFormField> {
        self.check(w)?;
        let n = self.dim();
        let lay = SymLayout::new(n);
        let level = w.level().max(self.curv.level());
        let mut out = OneFormField::zeros(self.grid, Repr::Physical).with_level(level);
        for &p in self.grid.region(level) {
            let p = p as usize;
            let ginv = self.metric.inverse_at(p);
            let ric = self.curv.ricci().at(p);
            let wv = w.at(p);
            let slot = out.at_mut(p);
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += ginv[lay.slot(k, l)] * ric[lay.slot(j, l)] * wv[k];
                    }
                }
                slot[j] = s;
            }
        }
        Ok(out)
    }

    /// `Δω − Ric·ω`.
    pub fn vector_laplacian(&self, w: &OneFormField) -> Result<OneFormField> {
        let mut lap = self.laplacian(w)?;
        let ric = self.ricci_dot(w)?;
        let level = lap.level().max(ric.level());
        lap.axpy(-1.0, &ric)?;
        let mut lap = lap.with_level(level);
        lap.restrict_to(self.grid, self.grid.region(level));
        Ok(lap)
    }

    /// `u − (1/n)(Tr_g u) g` pointwise on the region where `u` is valid.
    pub fn trace_free_part(&self, u: &SymTensor2Field) -> Result<SymTensor2Field> {
        self.check(u)?;
        let lay = SymLayout::new(self.dim());
        let inv_n = 1.0 / self.dim() as f64;
        let mut out = u.clone();
        for &p in self.grid.region(u.level()) {
            let p = p as usize;
            let tr = sym_contract(&lay, self.metric.inverse_at(p), u.at(p));
            let g = self.metric.comps().at(p);
            for (v, gm) in out.at_mut(p).iter_mut().zip(g) {
                *v -= inv_n * tr * gm;
            }
        }
        Ok(out)
    }

    /// Physical `g` itself as a field.
    pub fn metric_field(&self) -> &SymTensor2Field {
        self.metric.comps()
    }
}

pub(crate) fn to_tensor<K: FieldKind>(f: &Field<K>) -> TensorField {
    if K::RANK == 2 {
        TensorField::from_sym_data(f.dim(), f.level(), f.data())
    } else {
        TensorField::from_raw(f.dim(), K::RANK, f.level(), f.data().to_vec())
    }
}

pub(crate) fn from_tensor<K: FieldKind>(grid: &FieldGrid, t: TensorField) -> Result<Field<K>> {
    match K::RANK {
        2 => {
            let sym = t.symmetrize(grid)?;
            Field::<K>::from_data(grid, Repr::Physical, sym.level(), sym.into_data())
        }
        _ => {
            let level = t.level();
            let nc = K::ncomp(grid.dim());
            let mut data = vec![0.0; grid.node_count() * nc];
            for p in 0..grid.node_count() {
                data[p * nc..(p + 1) * nc].copy_from_slice(t.at(p));
            }
            Field::<K>::from_data(grid, Repr::Physical, level, data)
        }
    }
}
