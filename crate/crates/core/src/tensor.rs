//! Per-node index bookkeeping and small dense linear algebra.
//!
//! Symmetric rank-2 components are packed row-major over the upper triangle:
//! for n = 3 the order is `11, 12, 13, 22, 23, 33`. General tensors store all
//! `n^rank` components, last index fastest.

use crate::math::sqrt;
use crate::MAX_DIM;

/// Number of independent components of a symmetric n×n tensor.
pub const fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packing table between `(i, j)` pairs and symmetric storage slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymLayout {
    n: usize,
    slot: [[u8; MAX_DIM]; MAX_DIM],
    pairs: [(u8, u8); sym_len(MAX_DIM)],
}

impl SymLayout {
    pub fn new(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds MAX_DIM");
        let mut slot = [[0u8; MAX_DIM]; MAX_DIM];
        let mut pairs = [(0u8, 0u8); sym_len(MAX_DIM)];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                slot[i][j] = k as u8;
                slot[j][i] = k as u8;
                pairs[k] = (i as u8, j as u8);
                k += 1;
            }
        }
        SymLayout { n, slot, pairs }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        sym_len(self.n)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn slot(&self, i: usize, j: usize) -> usize {
        self.slot[i][j] as usize
    }

    #[inline]
    pub fn pair(&self, k: usize) -> (usize, usize) {
        let (i, j) = self.pairs[k];
        (i as usize, j as usize)
    }

    /// Expand packed symmetric storage to a full row-major matrix.
    pub fn unpack(&self, packed: &[f64], full: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                full[i * n + j] = packed[self.slot(i, j)];
            }
        }
    }

    /// Symmetrize a full row-major matrix into packed storage.
    pub fn pack(&self, full: &[f64], packed: &mut [f64]) {
        let n = self.n;
        for k in 0..self.len() {
            let (i, j) = self.pair(k);
            packed[k] = 0.5 * (full[i * n + j] + full[j * n + i]);
        }
    }
}

/// `n^rank`, the component count of a general covariant tensor.
pub const fn full_len(n: usize, rank: usize) -> usize {
    let mut out = 1;
    let mut r = 0;
    while r < rank {
        out *= n;
        r += 1;
    }
    out
}

/// Cholesky factorisation of a packed symmetric matrix.
///
/// Returns the inverse (packed) and the determinant, or `None` when the
/// matrix is not positive definite.
pub fn invert_spd(layout: &SymLayout, packed: &[f64]) -> Option<([f64; sym_len(MAX_DIM)], f64)> {
    let n = layout.dim();
    let mut l = [[0.0f64; MAX_DIM]; MAX_DIM];
    for j in 0..n {
        let mut d = packed[layout.slot(j, j)];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = sqrt(d);
        l[j][j] = djj;
        for i in (j + 1)..n {
            let mut s = packed[layout.slot(i, j)];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    // inverse of L (lower triangular)
    let mut li = [[0.0f64; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        li[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i][k] * li[k][j];
            }
            li[i][j] = s / l[i][i];
        }
    }
    let mut inv = [0.0f64; sym_len(MAX_DIM)];
    for k in 0..layout.len() {
        let (i, j) = layout.pair(k);
        let mut s = 0.0;
        for m in i.max(j)..n {
            s += li[m][i] * li[m][j];
        }
        inv[k] = s;
    }
    let mut det = 1.0;
    for i in 0..n {
        det *= l[i][i] * l[i][i];
    }
    Some((inv, det))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        for n in 1..=MAX_DIM {
            let lay = SymLayout::new(n);
            assert_eq!(lay.len(), n * (n + 1) / 2);
            for k in 0..lay.len() {
                let (i, j) = lay.pair(k);
                assert!(i <= j);
                assert_eq!(lay.slot(i, j), k);
                assert_eq!(lay.slot(j, i), k);
            }
        }
    }

    #[test]
    fn inverse_of_spd_matrix() {
        let lay = SymLayout::new(3);
        // [[4,1,0],[1,3,0.5],[0,0.5,2]]
        let a = [4.0, 1.0, 0.0, 3.0, 0.5, 2.0];
        let (inv, det) = invert_spd(&lay, &a).unwrap();
        let mut full_a = [0.0; 9];
        let mut full_i = [0.0; 9];
        lay.unpack(&a, &mut full_a);
        lay.unpack(&inv[..6], &mut full_i);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += full_a[i * 3 + k] * full_i[k * 3 + j];
                }
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-14);
            }
        }
        let expected = 4.0 * (3.0 * 2.0 - 0.25) - 1.0 * (2.0 - 0.0);
        assert!((det - expected).abs() < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let lay = SymLayout::new(2);
        assert!(invert_spd(&lay, &[1.0, 2.0, 1.0]).is_none());
        assert!(invert_spd(&lay, &[f64::NAN, 0.0, 1.0]).is_none());
    }
}
