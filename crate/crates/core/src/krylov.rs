//! Restarted flexible GMRES with right preconditioning.
//!
//! The preconditioner may change between iterations (for example an inner
//! iterative solve), which is why the preconditioned basis is stored.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-10,
            max_iter: 2000,
            restart: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KrylovStats {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Solves `A x = b` starting from the given `x`. `apply(v, out)` computes
/// `out = A v` and `precond(v, out)` computes `out ≈ A^{-1} v`.
pub fn fgmres<A, P>(
    mut apply: A,
    mut precond: P,
    b: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> Result<KrylovStats>
where
    A: FnMut(&[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    if x.len() != n {
        return Err(Error::ShapeMismatch(alloc::format!(
            "solution length {} for right-hand side length {n}",
            x.len()
        )));
    }
    if !(opts.tol > 0.0) || opts.restart == 0 {
        return Err(Error::param("tolerance", "tolerance and restart length must be positive"));
    }
    let bnorm = norm(b);
    if !bnorm.is_finite() {
        return Err(Error::NonFinite {
            what: "right-hand side",
            node: 0,
        });
    }
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats::default());
    }
    let m = opts.restart;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut hess = vec![0.0; (m + 1) * m];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut iterations = 0;
    let mut previous = f64::INFINITY;
    loop {
        apply(x, &mut w)?;
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite {
                what: "Krylov residual",
                node: 0,
            });
        }
        if rel <= opts.tol {
            return Ok(KrylovStats {
                iterations,
                residual: rel,
            });
        }
        // a whole cycle without progress means the operator or the
        // preconditioner is too inexact to reach the tolerance
        if iterations >= opts.max_iter || rel > 0.99 * previous {
            return Err(Error::LinearStall {
                iterations,
                residual: rel,
            });
        }
        previous = rel;
        basis.clear();
        zs.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        hess.iter_mut().for_each(|v| *v = 0.0);
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let mut z = vec![0.0; n];
            precond(&basis[k], &mut z)?;
            apply(&z, &mut w)?;
            zs.push(z);
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                hess[i * m + k] = h;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= h * vj;
                }
            }
            let hn = norm(&w);
            hess[(k + 1) * m + k] = hn;
            for i in 0..k {
                let a = hess[i * m + k];
                let c = hess[(i + 1) * m + k];
                hess[i * m + k] = cs[i] * a + sn[i] * c;
                hess[(i + 1) * m + k] = -sn[i] * a + cs[i] * c;
            }
            let a = hess[k * m + k];
            let c = hess[(k + 1) * m + k];
            let den = sqrt(a * a + c * c);
            if !den.is_finite() {
                return Err(Error::NonFinite {
                    what: "Arnoldi process",
                    node: k,
                });
            }
            let (ck, sk) = if den == 0.0 { (1.0, 0.0) } else { (a / den, c / den) };
            cs[k] = ck;
            sn[k] = sk;
            hess[k * m + k] = ck * a + sk * c;
            hess[(k + 1) * m + k] = 0.0;
            g[k + 1] = -sk * g[k];
            g[k] *= ck;
            iterations += 1;
            k += 1;
            let est = crate::math::abs(g[k]) / bnorm;
            if est <= opts.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution on the k×k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= hess[i * m + j] * y[j];
            }
            let d = hess[i * m + i];
            y[i] = if d == 0.0 { 0.0 } else { s / d };
        }
        for (j, z) in zs.iter().enumerate().take(k) {
            for (xi, zi) in x.iter_mut().zip(z) {
                *xi += y[j] * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = v.len();
        for i in 0..n {
            let l = if i > 0 { v[i - 1] } else { 0.0 };
            let r = if i + 1 < n { v[i + 1] } else { 0.0 };
            // non-symmetric convection-diffusion stencil
            out[i] = 2.5 * v[i] - 1.2 * l - 0.8 * r;
        }
        Ok(())
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 200;
        let exact: Vec<f64> = (0..n).map(|i| libm::sin(i as f64 * 0.1)).collect();
        let mut b = vec![0.0; n];
        tridiag(&exact, &mut b).unwrap();
        let mut x = vec![0.0; n];
        let opts = GmresOptions {
            tol: 1e-12,
            max_iter: 500,
            restart: 20,
        };
        let stats = fgmres(tridiag, |v, o| {
            o.copy_from_slice(v);
            Ok(())
        }, &b, &mut x, &opts)
        .unwrap();
        assert!(stats.residual <= 1e-12);
        let err = x.iter().zip(&exact).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let b = vec![0.0; 5];
        let mut x = vec![1.0; 5];
        let s = fgmres(tridiag, |v, o| {
            o.copy_from_slice(v);
            Ok(())
        }, &b, &mut x, &GmresOptions::default())
        .unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reports_stall() {
        let n = 100;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let opts = GmresOptions {
            tol: 1e-14,
            max_iter: 3,
            restart: 2,
        };
        let e = fgmres(tridiag, |v, o| {
            o.copy_from_slice(v);
            Ok(())
        }, &b, &mut x, &opts)
        .unwrap_err();
        assert!(matches!(e, Error::LinearStall { iterations: 3, .. }));
    }
}
