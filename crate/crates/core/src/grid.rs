//! Masked Cartesian grid over the truncated Poincaré ball.
//!
//! Nodes sit at `x_a = (i_a - c) h` with `c = (N-1)/2`, so the origin is a
//! node for odd `N`. Every node is classified as
//!
//! * `Interior`: `|x| < r_max` and every centered stencil neighbour has
//!   `|x| <= r_max`. Unknowns live here.
//! * `Collar`: `|x| <= r_max` but not interior. Unknowns are pinned to zero.
//! * `Halo`: `r_max < |x| < (1 + r_max)/2`. No unknowns; fields carry their
//!   zero-extended (rescaled) or background values so that tangential
//!   derivatives at collar nodes have data to work with.
//! * `Exterior`: everything else. Never read.
//!
//! Derivatives are taken in passes. Data valid on region `L` yields
//! derivatives on region `L+1`, the subset of region `L` where every axis has
//! a difference window of width `order + 1` inside region `L`. The window is
//! centered when possible and otherwise shifted toward the origin, down to
//! fully one-sided.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::{CORE_RADIUS, MAX_DIM};

/// Number of derivative passes for which stencil tables are built.
pub const MAX_LEVEL: usize = 4;

const NO_WINDOW: i8 = i8::MIN;

/// Finite-difference order of accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(FdOrder::Second),
            4 => Ok(FdOrder::Fourth),
            other => Err(Error::param("fd_order", alloc::format!("{other} is not one of 2, 4"))),
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }

    /// Half-width of the centered stencil.
    pub fn radius(self) -> usize {
        self.as_int() / 2
    }

    /// Number of points in a first-derivative window.
    pub fn width(self) -> usize {
        self.as_int() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeClass {
    Interior,
    Collar,
    Halo,
    Exterior,
}

#[derive(Debug, Clone)]
struct Level {
    member: Vec<bool>,
    nodes: Vec<u32>,
    // start offset of the window per (node, axis); NO_WINDOW outside the level
    window: Vec<i8>,
}

#[derive(Debug, Clone)]
pub struct FieldGrid {
    dim: usize,
    points: usize,
    r_max: f64,
    spacing: f64,
    order: FdOrder,
    halo_radius: f64,
    strides: [usize; MAX_DIM],
    class: Vec<NodeClass>,
    levels: Vec<Level>,
    interior: Vec<u32>,
    core: Vec<u32>,
    // weights[start + order][k], already divided by the spacing
    weights: Vec<[f64; 5]>,
}

impl FieldGrid {
    /// Builds the grid, the node mask and the stencil tables.
    pub fn build(dim: usize, points: usize, r_max: f64, order: FdOrder) -> Result<Self> {
        if !(3..=MAX_DIM).contains(&dim) {
            return Err(Error::param("n", alloc::format!("{dim} is outside 3..={MAX_DIM}")));
        }
        if points < 9 || points.is_multiple_of(2) {
            return Err(Error::param(
                "N",
                alloc::format!("{points} points per axis; need an odd number >= 9"),
            ));
        }
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(Error::param("r_max", alloc::format!("{r_max} is outside (0, 1)")));
        }
        let total = points
            .checked_pow(dim as u32)
            .filter(|&t| t <= u32::MAX as usize)
            .ok_or_else(|| Error::param("N", "grid has too many nodes"))?;

        let spacing = 2.0 * r_max / (points - 1) as f64;
        let halo_radius = r_max + 0.5 * (1.0 - r_max);
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= points;
        }

        let mut grid = FieldGrid {
            dim,
            points,
            r_max,
            spacing,
            order,
            halo_radius,
            strides,
            class: vec![NodeClass::Exterior; total],
            levels: Vec::new(),
            interior: Vec::new(),
            core: Vec::new(),
            weights: window_weights(order, spacing),
        };
        grid.classify();
        grid.build_levels();
        Ok(grid)
    }

    fn classify(&mut self) {
        let r2max = self.r_max * self.r_max;
        let within = |r2: f64| r2 <= r2max * (1.0 + 1e-12);
        let halo2 = self.halo_radius * self.halo_radius;
        let radius = self.order.radius() as isize;
        let core2 = CORE_RADIUS * CORE_RADIUS;
        for node in 0..self.class.len() {
            let x = self.coords(node);
            let r2 = norm2(&x[..self.dim]);
            let class = if r2 < r2max * (1.0 - 1e-12) {
                let idx = self.multi_index(node);
                let mut complete = true;
                'axes: for a in 0..self.dim {
                    for k in -radius..=radius {
                        let ia = idx[a] as isize + k;
                        if ia < 0 || ia >= self.points as isize {
                            complete = false;
                            break 'axes;
                        }
                        let mut y = x;
                        y[a] = self.axis_coord(ia as usize);
                        if !within(norm2(&y[..self.dim])) {
                            complete = false;
                            break 'axes;
                        }
                    }
                }
                if complete {
                    NodeClass::Interior
                } else {
                    NodeClass::Collar
                }
            } else if within(r2) {
                NodeClass::Collar
            } else if r2 < halo2 {
                NodeClass::Halo
            } else {
                NodeClass::Exterior
            };
            self.class[node] = class;
            if class == NodeClass::Interior {
                self.interior.push(node as u32);
                if r2 <= core2 * (1.0 + 1e-12) {
                    self.core.push(node as u32);
                }
            }
        }
    }

    fn build_levels(&mut self) {
        let total = self.class.len();
        let member: Vec<bool> = self.class.iter().map(|c| *c != NodeClass::Exterior).collect();
        let nodes = member
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| i as u32)
            .collect();
        self.levels.push(Level {
            member,
            nodes,
            window: Vec::new(),
        });
        let order = self.order.as_int() as isize;
        let centered = -(self.order.radius() as isize);
        for level in 1..=MAX_LEVEL {
            let below = &self.levels[level - 1];
            let mut member = vec![false; total];
            let mut window = vec![NO_WINDOW; total * self.dim];
            let mut nodes = Vec::new();
            for &p in &below.nodes {
                let p = p as usize;
                let idx = self.multi_index(p);
                let x = self.coords(p);
                let mut ok = true;
                for a in 0..self.dim {
                    let inward = if x[a] > 0.0 { -1 } else if x[a] < 0.0 { 1 } else { -1 };
                    let mut chosen = None;
                    'search: for d in 0..=(order / 2) {
                        let cands: [isize; 2] = if d == 0 {
                            [centered, centered]
                        } else {
                            [centered + inward * d, centered - inward * d]
                        };
                        for start in cands {
                            if self.window_fits(&below.member, p, &idx, a, start) {
                                chosen = Some(start);
                                break 'search;
                            }
                        }
                    }
                    match chosen {
                        Some(start) => window[p * self.dim + a] = start as i8,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    member[p] = true;
                    nodes.push(p as u32);
                } else {
                    for a in 0..self.dim {
                        window[p * self.dim + a] = NO_WINDOW;
                    }
                }
            }
            self.levels.push(Level {
                member,
                nodes,
                window,
            });
        }
    }

    fn window_fits(
        &self,
        member: &[bool],
        p: usize,
        idx: &[usize; MAX_DIM],
        axis: usize,
        start: isize,
    ) -> bool {
        let width = self.order.width() as isize;
        for k in 0..width {
            let ia = idx[axis] as isize + start + k;
            if ia < 0 || ia >= self.points as isize {
                return false;
            }
            let q = (p as isize + (start + k) * self.strides[axis] as isize) as usize;
            if !member[q] {
                return false;
            }
        }
        true
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn fd_order(&self) -> FdOrder {
        self.order
    }

    #[inline]
    pub fn halo_radius(&self) -> f64 {
        self.halo_radius
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    #[inline]
    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    /// Interior nodes in increasing index order; the unknowns live here.
    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior
    }

    /// Interior nodes with `|x| <= CORE_RADIUS`.
    pub fn core_nodes(&self) -> &[u32] {
        &self.core
    }

    /// Nodes at which data `level` derivative passes deep can be formed.
    pub fn region(&self, level: usize) -> &[u32] {
        &self.levels[level].nodes
    }

    #[inline]
    pub fn in_region(&self, level: usize, node: usize) -> bool {
        self.levels[level].member[node]
    }

    /// Deepest level that still contains every interior node.
    pub fn interior_depth(&self) -> usize {
        let mut depth = 0;
        for level in 0..=MAX_LEVEL {
            if self
                .interior
                .iter()
                .all(|&p| self.levels[level].member[p as usize])
            {
                depth = level;
            } else {
                break;
            }
        }
        depth
    }

    /// Deepest level containing every core node.
    pub fn core_depth(&self) -> usize {
        let mut depth = 0;
        for level in 0..=MAX_LEVEL {
            if self.core.iter().all(|&p| self.levels[level].member[p as usize]) {
                depth = level;
            } else {
                break;
            }
        }
        depth
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        let c = (self.points - 1) / 2;
        (i as isize - c as isize) as f64 * self.spacing
    }

    pub fn multi_index(&self, node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = node;
        for a in 0..self.dim {
            idx[a] = rem / self.strides[a];
            rem %= self.strides[a];
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides[..self.dim])
            .map(|(i, s)| i * s)
            .sum()
    }

    /// Coordinates of a node; entries past `dim` are zero.
    pub fn coords(&self, node: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(node);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.axis_coord(idx[a]);
        }
        x
    }

    pub fn radius(&self, node: usize) -> f64 {
        sqrt(norm2(&self.coords(node)[..self.dim]))
    }

    /// Node nearest to `x` (no class check).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let c = ((self.points - 1) / 2) as f64;
        let mut idx = [0usize; MAX_DIM];
        for a in 0..self.dim {
            let i = libm::round(x[a] / self.spacing + c);
            idx[a] = i.clamp(0.0, (self.points - 1) as f64) as usize;
        }
        self.node_index(&idx[..self.dim])
    }

    /// Start offset of the difference window used at `node` along `axis` for
    /// data valid `level - 1` passes deep.
    pub fn window_start(&self, level: usize, node: usize, axis: usize) -> Option<isize> {
        if level == 0 || level > MAX_LEVEL {
            return None;
        }
        let w = self.levels[level].window[node * self.dim + axis];
        (w != NO_WINDOW).then_some(w as isize)
    }

    /// `Σ_k w_k²` of the centered first-derivative stencil, which is the
    /// self-coefficient of the twice-applied difference `−D∘D`.
    pub(crate) fn centered_square_sum(&self) -> f64 {
        let r = self.order.radius() as isize;
        self.weights_for(-r).iter().map(|w| w * w).sum()
    }

    #[inline]
    fn weights_for(&self, start: isize) -> &[f64; 5] {
        &self.weights[(start + self.order.as_int() as isize) as usize]
    }

    /// Derivative along `axis` at `node` of component `comp` of interleaved
    /// data (`ncomp` values per node) that is valid on region `level`.
    pub fn fd_partial(
        &self,
        data: &[f64],
        ncomp: usize,
        comp: usize,
        level: usize,
        axis: usize,
        node: usize,
    ) -> Result<f64> {
        if level >= MAX_LEVEL {
            return Err(Error::MarginViolation {
                needed: level + 1,
                available: MAX_LEVEL,
            });
        }
        if axis >= self.dim || comp >= ncomp || node >= self.node_count() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "axis {axis}, component {comp}/{ncomp}, node {node}"
            )));
        }
        let start = self
            .window_start(level + 1, node, axis)
            .ok_or(Error::ExteriorAccess { node })?;
        let w = self.weights_for(start);
        let stride = self.strides[axis] as isize;
        let mut acc = 0.0;
        for (k, wk) in w.iter().take(self.order.width()).enumerate() {
            let q = (node as isize + (start + k as isize) * stride) as usize;
            acc += wk * data[q * ncomp + comp];
        }
        Ok(acc)
    }

    /// All first derivatives at `node` of every component, laid out as
    /// `out[axis * ncomp + comp]`. `node` must belong to region `level + 1`.
    #[inline]
    pub(crate) fn gradient_at(
        &self,
        data: &[f64],
        ncomp: usize,
        level: usize,
        node: usize,
        out: &mut [f64],
    ) {
        let width = self.order.width();
        let lvl = &self.levels[level + 1];
        for a in 0..self.dim {
            let start = lvl.window[node * self.dim + a] as isize;
            debug_assert!(start != NO_WINDOW as isize);
            let w = self.weights_for(start);
            let stride = self.strides[a] as isize;
            let o = &mut out[a * ncomp..(a + 1) * ncomp];
            o.iter_mut().for_each(|v| *v = 0.0);
            for (k, &wk) in w.iter().take(width).enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let q = (node as isize + (start + k as isize) * stride) as usize;
                let src = &data[q * ncomp..(q + 1) * ncomp];
                for (oc, s) in o.iter_mut().zip(src) {
                    *oc += wk * s;
                }
            }
        }
    }

    /// Gradient of every component over region `level + 1`, stored as
    /// `n * ncomp` values per node (axis-major). Zero elsewhere.
    pub fn gradient(&self, data: &[f64], ncomp: usize, level: usize) -> Result<Vec<f64>> {
        if level >= MAX_LEVEL {
            return Err(Error::MarginViolation {
                needed: level + 1,
                available: MAX_LEVEL,
            });
        }
        let block = self.dim * ncomp;
        let mut out = vec![0.0; self.node_count() * block];
        for &p in self.region(level + 1) {
            let p = p as usize;
            self.gradient_at(data, ncomp, level, p, &mut out[p * block..(p + 1) * block]);
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// First-derivative weights at offset 0 for windows `start..start+order`,
/// from differentiating the Lagrange interpolant.
fn window_weights(order: FdOrder, spacing: f64) -> Vec<[f64; 5]> {
    let p = order.as_int() as isize;
    let width = order.width();
    let mut table = Vec::new();
    for start in -p..=0 {
        let z: Vec<f64> = (0..width as isize).map(|k| (start + k) as f64).collect();
        let mut w = [0.0; 5];
        for j in 0..width {
            let mut total = 0.0;
            for m in 0..width {
                if m == j {
                    continue;
                }
                let mut term = 1.0 / (z[j] - z[m]);
                for l in 0..width {
                    if l == j || l == m {
                        continue;
                    }
                    term *= (0.0 - z[l]) / (z[j] - z[l]);
                }
                total += term;
            }
            w[j] = total / spacing;
        }
        table.push(w);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_fourth_order_weights() {
        let w = window_weights(FdOrder::Fourth, 1.0);
        let c = w[2];
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for k in 0..5 {
            assert!(libm::fabs(c[k] - expect[k]) < 1e-14, "{k}: {}", c[k]);
        }
        let fwd = w[4];
        let expect = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25];
        for k in 0..5 {
            assert!(libm::fabs(fwd[k] - expect[k]) < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FieldGrid::build(3, 8, 0.9, FdOrder::Fourth).is_err());
        assert!(FieldGrid::build(3, 7, 0.9, FdOrder::Fourth).is_err());
        assert!(FieldGrid::build(3, 9, 1.0, FdOrder::Fourth).is_err());
        assert!(FieldGrid::build(3, 9, 0.0, FdOrder::Fourth).is_err());
        assert!(FieldGrid::build(2, 9, 0.9, FdOrder::Fourth).is_err());
        assert!(FdOrder::from_int(3).is_err());
    }

    #[test]
    fn origin_is_interior() {
        let g = FieldGrid::build(3, 9, 0.9, FdOrder::Second).unwrap();
        let origin = g.node_index(&[4, 4, 4]);
        assert_eq!(g.coords(origin)[..3], [0.0, 0.0, 0.0]);
        assert_eq!(g.class(origin), NodeClass::Interior);
    }

    #[test]
    fn interior_reaches_residual_depth_at_default() {
        let g = FieldGrid::build(3, 33, 0.9, FdOrder::Fourth).unwrap();
        assert!(g.interior_depth() >= 2);
        assert!(g.core_depth() >= 3);
    }
}
