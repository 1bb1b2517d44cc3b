//! Closed-form Poincaré ball geometry.
//!
//! `ρ(x) = (1 - |x|^2)/2` and `g0 = ρ^{-2} δ = 4 δ / (1 - |x|^2)^2`, so the
//! compactified metric `ρ^2 g0` is exactly Euclidean and `|dρ| = |x|`.

use crate::error::{Error, Result};
use crate::grid::norm2;
use crate::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundGeometry {
    dim: usize,
}

impl BackgroundGeometry {
    pub fn new(dim: usize) -> Result<Self> {
        if !(3..=MAX_DIM).contains(&dim) {
            return Err(Error::param("n", alloc::format!("{dim} is outside 3..={MAX_DIM}")));
        }
        Ok(BackgroundGeometry { dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Defining function; positive on the open ball.
    #[inline]
    pub fn rho_at(&self, x: &[f64]) -> f64 {
        0.5 * (1.0 - norm2(&x[..self.dim]))
    }

    /// Conformal factor `ρ^{-2}` of `g0 = ρ^{-2} δ`.
    #[inline]
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        let rho = self.rho_at(x);
        1.0 / (rho * rho)
    }

    /// `g0_ij` at `x`, row-major.
    pub fn g0_at(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let f = self.conformal_factor(x);
        let mut g = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in g.iter_mut().enumerate().take(self.dim) {
            row[i] = f;
        }
        g
    }

    /// `ρ^2 g0_ij`, the compactified metric.
    pub fn compactified_at(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        let rho = self.rho_at(x);
        let mut g = self.g0_at(x);
        for row in g.iter_mut().take(self.dim) {
            for v in row.iter_mut().take(self.dim) {
                *v *= rho * rho;
            }
        }
        g
    }

    /// `|dρ|` measured in the compactified metric, `= |x|`.
    pub fn d_rho_norm_compact(&self, x: &[f64]) -> f64 {
        crate::math::sqrt(norm2(&x[..self.dim]))
    }

    /// Scalar curvature of the model metric, `-n(n-1)`.
    pub fn scalar_curvature(&self) -> f64 {
        let n = self.dim as f64;
        -n * (n - 1.0)
    }

    /// Einstein constant: `Ric(g0) = -(n-1) g0`.
    pub fn einstein_constant(&self) -> f64 {
        -(self.dim as f64 - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_and_metric_at_origin() {
        let bg = BackgroundGeometry::new(3).unwrap();
        let o = [0.0; 3];
        assert_eq!(bg.rho_at(&o), 0.5);
        assert_eq!(bg.g0_at(&o)[1][1], 4.0);
        assert_eq!(bg.compactified_at(&o)[2][2], 1.0);
        assert_eq!(bg.d_rho_norm_compact(&[1.0, 0.0, 0.0]), 1.0);
        assert_eq!(bg.scalar_curvature(), -6.0);
    }
}
