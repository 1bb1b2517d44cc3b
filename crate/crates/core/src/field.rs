//! Tensor fields over the grid, their two representations, and norms.
//!
//! A field stores `ncomp` interleaved values per node for every node of the
//! grid. Its `level` records how many derivative passes deep the data is
//! valid: level `L` means valid on [`FieldGrid::region`]`(L)`; values
//! elsewhere are zero and carry no meaning.
//!
//! One-forms and symmetric 2-tensors are either `Physical` (coordinate
//! components) or `Rescaled` (`ξ̄ = ρ ξ`, `h̄ = ρ² h`). Rescaled components
//! coincide with components in the orthonormal frame of `g0`.

use alloc::vec;
use alloc::vec::Vec;
use core::marker::PhantomData;

use crate::background::BackgroundGeometry;
use crate::error::{Error, Result};
use crate::grid::FieldGrid;
use crate::math::{powf, sqrt};
use crate::tensor::{sym_len, SymLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Repr {
    Physical,
    Rescaled,
}

impl Repr {
    fn name(self) -> &'static str {
        match self {
            Repr::Physical => "physical",
            Repr::Rescaled => "rescaled",
        }
    }
}

mod sealed {
    pub trait Sealed {}
}

/// Tensor type of a field: scalar, one-form or symmetric 2-tensor.
pub trait FieldKind: sealed::Sealed + Copy + PartialEq + core::fmt::Debug {
    /// Number of covariant indices.
    const RANK: usize;
    const NAME: &'static str;
    fn ncomp(dim: usize) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneForm;
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2;

impl sealed::Sealed for Scalar {}
impl sealed::Sealed for OneForm {}
impl sealed::Sealed for Sym2 {}

impl FieldKind for Scalar {
    const RANK: usize = 0;
    const NAME: &'static str = "scalar";
    fn ncomp(_: usize) -> usize {
        1
    }
}

impl FieldKind for OneForm {
    const RANK: usize = 1;
    const NAME: &'static str = "one-form";
    fn ncomp(dim: usize) -> usize {
        dim
    }
}

impl FieldKind for Sym2 {
    const RANK: usize = 2;
    const NAME: &'static str = "symmetric 2-tensor";
    fn ncomp(dim: usize) -> usize {
        sym_len(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field<K: FieldKind> {
    dim: usize,
    repr: Repr,
    level: usize,
    data: Vec<f64>,
    kind: PhantomData<K>,
}

pub type ScalarField = Field<Scalar>;
pub type OneFormField = Field<OneForm>;
pub type SymTensor2Field = Field<Sym2>;

impl<K: FieldKind> Field<K> {
    pub fn zeros(grid: &FieldGrid, repr: Repr) -> Self {
        let nc = K::ncomp(grid.dim());
        Field {
            dim: grid.dim(),
            repr,
            level: 0,
            data: vec![0.0; grid.node_count() * nc],
            kind: PhantomData,
        }
    }

    /// Fills every region-0 node from `f(x, out)`.
    pub fn from_fn(
        grid: &FieldGrid,
        repr: Repr,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Self {
        let mut field = Self::zeros(grid, repr);
        let nc = field.ncomp();
        for &p in grid.region(0) {
            let p = p as usize;
            let x = grid.coords(p);
            f(&x[..grid.dim()], &mut field.data[p * nc..(p + 1) * nc]);
        }
        field
    }

    pub fn from_data(grid: &FieldGrid, repr: Repr, level: usize, data: Vec<f64>) -> Result<Self> {
        let nc = K::ncomp(grid.dim());
        if data.len() != grid.node_count() * nc {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} data of length {} on a grid of {} nodes",
                K::NAME,
                data.len(),
                grid.node_count()
            )));
        }
        Ok(Field {
            dim: grid.dim(),
            repr,
            level,
            data,
            kind: PhantomData,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        K::ncomp(self.dim)
    }

    #[inline]
    pub fn repr(&self) -> Repr {
        self.repr
    }

    /// Derivative depth of the region on which the data is valid.
    #[inline]
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = level;
        self
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

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn check_grid(&self, grid: &FieldGrid) -> Result<()> {
        if self.dim != grid.dim() || self.data.len() != grid.node_count() * self.ncomp() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} field does not match grid (n = {}, {} nodes)",
                K::NAME,
                grid.dim(),
                grid.node_count()
            )));
        }
        Ok(())
    }

    pub fn require(&self, repr: Repr) -> Result<()> {
        if self.repr != repr {
            return Err(Error::Representation(self.repr.name()));
        }
        Ok(())
    }

    /// Zeroes every node outside `nodes`.
    pub fn restrict_to(&mut self, grid: &FieldGrid, nodes: &[u32]) {
        let nc = self.ncomp();
        let mut keep = vec![false; grid.node_count()];
        for &p in nodes {
            keep[p as usize] = true;
        }
        for (p, k) in keep.iter().enumerate() {
            if !k {
                self.data[p * nc..(p + 1) * nc].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`; the result is valid where both inputs are.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        if other.data.len() != self.data.len() || other.repr != self.repr {
            return Err(Error::ShapeMismatch(alloc::format!("axpy on unlike {} fields", K::NAME)));
        }
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
        self.level = self.level.max(other.level);
        Ok(())
    }

    /// Fails on the first NaN or infinity among region-`level` nodes.
    pub fn check_finite(&self, grid: &FieldGrid, what: &'static str) -> Result<()> {
        for &p in grid.region(self.level.min(crate::grid::MAX_LEVEL)) {
            if self.at(p as usize).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what,
                    node: p as usize,
                });
            }
        }
        Ok(())
    }

    fn rescale(&self, grid: &FieldGrid, bg: &BackgroundGeometry, power: i32) -> Self {
        let mut out = self.clone();
        let nc = self.ncomp();
        for p in 0..grid.node_count() {
            let x = grid.coords(p);
            let rho = bg.rho_at(&x);
            let slot = &mut out.data[p * nc..(p + 1) * nc];
            if rho <= 0.0 {
                slot.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            let f = libm::pow(rho, power as f64);
            slot.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    /// Rescaled → physical: divide by `ρ^rank`.
    pub fn to_physical(&self, grid: &FieldGrid, bg: &BackgroundGeometry) -> Result<Self> {
        self.check_grid(grid)?;
        self.require(Repr::Rescaled)
            .map_err(|_| Error::Representation(Repr::Physical.name()))?;
        let mut out = self.rescale(grid, bg, -(K::RANK as i32));
        out.repr = Repr::Physical;
        Ok(out)
    }

    /// Physical → rescaled: multiply by `ρ^rank`.
    pub fn to_rescaled(&self, grid: &FieldGrid, bg: &BackgroundGeometry) -> Result<Self> {
        self.check_grid(grid)?;
        self.require(Repr::Physical)
            .map_err(|_| Error::Representation(Repr::Rescaled.name()))?;
        let mut out = self.rescale(grid, bg, K::RANK as i32);
        out.repr = Repr::Rescaled;
        Ok(out)
    }

    /// Pointwise `g0` inner product of two physical fields at `node`.
    fn frame_dot(&self, other: &Self, bg: &BackgroundGeometry, x: &[f64], node: usize) -> f64 {
        let a = self.at(node);
        let b = other.at(node);
        let rho = bg.rho_at(x);
        match K::RANK {
            0 => a[0] * b[0],
            1 => rho * rho * a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>(),
            _ => {
                let lay = SymLayout::new(self.dim);
                let mut s = 0.0;
                for k in 0..lay.len() {
                    let (i, j) = lay.pair(k);
                    let mult = if i == j { 1.0 } else { 2.0 };
                    s += mult * a[k] * b[k];
                }
                let r2 = rho * rho;
                r2 * r2 * s
            }
        }
    }
}

impl SymTensor2Field {
    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        let lay = SymLayout::new(self.dim);
        self.at(node)[lay.slot(i, j)]
    }
}

/// Node set over which a norm or check is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Region {
    Interior,
    /// Interior nodes with `|x| <= 0.7`.
    Core,
}

impl Region {
    pub fn nodes(self, grid: &FieldGrid) -> &[u32] {
        match self {
            Region::Interior => grid.interior_nodes(),
            Region::Core => grid.core_nodes(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Interior => "interior",
            Region::Core => "core |x| <= 0.7",
        }
    }
}

/// `|u|_{g0}` at a node of a physical field.
pub fn frame_norm<K: FieldKind>(
    field: &Field<K>,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    node: usize,
) -> Result<f64> {
    field.check_grid(grid)?;
    field.require(Repr::Physical)?;
    if !grid.in_region(0, node) {
        return Err(Error::ExteriorAccess { node });
    }
    let x = grid.coords(node);
    Ok(sqrt(field.frame_dot(field, bg, &x, node).max(0.0)))
}

/// `sup ρ^{-s} |u|_{g0}` over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightedNorm {
    pub s: f64,
    pub region: Region,
}

impl WeightedNorm {
    pub fn new(s: f64) -> Self {
        WeightedNorm {
            s,
            region: Region::Interior,
        }
    }

    pub fn on(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn eval<K: FieldKind>(
        &self,
        field: &Field<K>,
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
    ) -> Result<f64> {
        field.check_grid(grid)?;
        field.require(Repr::Physical)?;
        let mut best = 0.0f64;
        for &p in self.region.nodes(grid) {
            let p = p as usize;
            let x = grid.coords(p);
            let rho = bg.rho_at(&x);
            let v = sqrt(field.frame_dot(field, bg, &x, p).max(0.0)) * powf(rho, -self.s);
            if v.is_nan() {
                return Err(Error::NonFinite {
                    what: "weighted norm",
                    node: p,
                });
            }
            best = best.max(v);
        }
        Ok(best)
    }
}

/// Weighted sup norm over the interior.
pub fn weighted_sup_norm<K: FieldKind>(
    field: &Field<K>,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
    s: f64,
) -> Result<f64> {
    WeightedNorm::new(s).eval(field, grid, bg)
}

/// Discrete `L²(g0)` pairing over interior nodes, `Σ ⟨a,b⟩ dV` with
/// `dV = sqrt(det g0) h^n`.
pub fn l2_inner<K: FieldKind>(
    a: &Field<K>,
    b: &Field<K>,
    grid: &FieldGrid,
    bg: &BackgroundGeometry,
) -> Result<f64> {
    a.check_grid(grid)?;
    b.check_grid(grid)?;
    a.require(Repr::Physical)?;
    b.require(Repr::Physical)?;
    let cell = powf(grid.spacing(), grid.dim() as f64);
    let mut total = 0.0;
    for &p in grid.interior_nodes() {
        let p = p as usize;
        let x = grid.coords(p);
        let rho = bg.rho_at(&x);
        let vol = powf(rho, -(grid.dim() as f64)) * cell;
        total += a.frame_dot(b, bg, &x, p) * vol;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FdOrder;

    fn setup() -> (FieldGrid, BackgroundGeometry) {
        (
            FieldGrid::build(3, 9, 0.9, FdOrder::Second).unwrap(),
            BackgroundGeometry::new(3).unwrap(),
        )
    }

    #[test]
    fn rescaled_identity_at_origin_becomes_four_delta() {
        let (grid, bg) = setup();
        let h_bar = SymTensor2Field::from_fn(&grid, Repr::Rescaled, |_, out| {
            out.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        });
        let h = h_bar.to_physical(&grid, &bg).unwrap();
        let o = grid.node_index(&[4, 4, 4]);
        assert_eq!(h.get(o, 0, 0), 4.0);
        assert_eq!(h.get(o, 0, 1), 0.0);
        assert_eq!(h.repr(), Repr::Physical);
        assert_eq!(
            h.to_physical(&grid, &bg),
            Err(Error::Representation("physical"))
        );
    }

    #[test]
    fn zero_maps_to_zero() {
        let (grid, bg) = setup();
        let z = SymTensor2Field::zeros(&grid, Repr::Rescaled);
        assert!(z.to_physical(&grid, &bg).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn metric_has_norm_sqrt_n() {
        let (grid, bg) = setup();
        let g0 = SymTensor2Field::from_fn(&grid, Repr::Physical, |x, out| {
            let f = bg.conformal_factor(x);
            out.copy_from_slice(&[f, 0.0, 0.0, f, 0.0, f]);
        });
        for &p in grid.region(0) {
            let v = frame_norm(&g0, &grid, &bg, p as usize).unwrap();
            assert!(libm::fabs(v - libm::sqrt(3.0)) < 1e-12);
        }
    }

    #[test]
    fn unit_covector_at_origin() {
        let (grid, bg) = setup();
        let w = OneFormField::from_fn(&grid, Repr::Physical, |_, out| {
            out.copy_from_slice(&[1.0, 0.0, 0.0]);
        });
        let o = grid.node_index(&[4, 4, 4]);
        assert_eq!(frame_norm(&w, &grid, &bg, o).unwrap(), 0.5);
    }

    #[test]
    fn weighted_norm_of_rho_power_is_one() {
        let (grid, bg) = setup();
        let s = 1.5;
        let u = ScalarField::from_fn(&grid, Repr::Physical, |x, out| {
            out[0] = libm::pow(bg.rho_at(x), s);
        });
        let v = weighted_sup_norm(&u, &grid, &bg, s).unwrap();
        assert!(libm::fabs(v - 1.0) < 1e-14);
    }
}
