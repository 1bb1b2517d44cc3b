//! Deterministic random smooth fields for tests, probes and verification.
//!
//! Each component is a short sum of random plane waves multiplied by a
//! smooth cutoff. Fields are generated in rescaled (frame) components, so the
//! frame norm of the physical field equals the Euclidean size of the sampled
//! components.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::background::BackgroundGeometry;
use crate::error::Result;
use crate::field::{Field, FieldKind, Repr};
use crate::grid::{norm2, FieldGrid};
use crate::math::{cos, exp, sqrt};
use crate::tensor::SymLayout;

const MODES: usize = 4;
const DEFAULT_BANDWIDTH: f64 = 1.0;

/// Where a sampled field is allowed to be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// Smooth everywhere on the grid.
    Everywhere,
    /// Multiplied by the `C^∞` bump `exp(1 − 1/(1 − |x|²/R²))`, zero for `|x| ≥ R`.
    Ball(f64),
    /// Multiplied by `(1 − |x|²/R²)^m`, zero for `|x| ≥ R`.
    PolyBall(f64, u32),
    /// Multiplied by `exp(−|x|²/σ²)`.
    Gaussian(f64),
}

impl Support {
    fn cutoff(self, x: &[f64]) -> f64 {
        match self {
            Support::Everywhere => 1.0,
            Support::Ball(r) => {
                let t = norm2(x) / (r * r);
                if t >= 1.0 {
                    0.0
                } else {
                    exp(1.0 - 1.0 / (1.0 - t))
                }
            }
            Support::Gaussian(sigma) => exp(-norm2(x) / (sigma * sigma)),
            Support::PolyBall(r, m) => {
                let t = norm2(x) / (r * r);
                if t >= 1.0 {
                    0.0
                } else {
                    libm::pow(1.0 - t, m as f64)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Wave {
    k: [f64; 4],
    phase: f64,
    amp: f64,
}

/// Seeded generator of smooth fields.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    rng: ChaCha8Rng,
    bandwidth: f64,
}

impl FieldSampler {
    pub fn new(seed: u64) -> Self {
        FieldSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bandwidth: DEFAULT_BANDWIDTH,
        }
    }

    /// Largest wavenumber per axis of the sampled plane waves.
    pub fn with_bandwidth(mut self, k: f64) -> Self {
        self.bandwidth = k;
        self
    }

    fn waves(&mut self, n: usize) -> Vec<Wave> {
        (0..MODES)
            .map(|_| {
                let mut k = [0.0; 4];
                for v in k.iter_mut().take(n) {
                    *v = self.rng.gen_range(-self.bandwidth..self.bandwidth);
                }
                Wave {
                    k,
                    phase: self.rng.gen_range(0.0..core::f64::consts::TAU),
                    amp: self.rng.gen_range(-1.0..1.0),
                }
            })
            .collect()
    }

    /// Rescaled-flag field with smooth random components, scaled so that the
    /// largest Euclidean component norm over region 0 is `1`.
    pub fn rescaled<K: FieldKind>(&mut self, grid: &FieldGrid, support: Support) -> Field<K> {
        let n = grid.dim();
        let nc = K::ncomp(n);
        let lay = SymLayout::new(n);
        let waves: Vec<Vec<Wave>> = (0..nc).map(|_| self.waves(n)).collect();
        let mut field = Field::<K>::from_fn(grid, Repr::Rescaled, |x, out| {
            let c = support.cutoff(x);
            if c == 0.0 {
                return;
            }
            for (o, ws) in out.iter_mut().zip(&waves) {
                let mut v = 0.0;
                for w in ws {
                    let kx: f64 = (0..n).map(|a| w.k[a] * x[a]).sum();
                    v += w.amp * cos(kx + w.phase);
                }
                *o = c * v;
            }
        });
        let mut peak: f64 = 0.0;
        for &p in grid.region(0) {
            let v = field.at(p as usize);
            let s = if K::RANK == 2 {
                (0..lay.len())
                    .map(|k| {
                        let (i, j) = lay.pair(k);
                        if i == j {
                            v[k] * v[k]
                        } else {
                            2.0 * v[k] * v[k]
                        }
                    })
                    .sum::<f64>()
            } else {
                norm2(v)
            };
            peak = peak.max(sqrt(s));
        }
        if peak > 0.0 {
            field.scale(1.0 / peak);
        }
        field
    }

    /// Physical field whose frame norm peaks at `1`.
    pub fn physical<K: FieldKind>(
        &mut self,
        grid: &FieldGrid,
        bg: &BackgroundGeometry,
        support: Support,
    ) -> Result<Field<K>> {
        self.rescaled::<K>(grid, support).to_physical(grid, bg)
    }

    /// Uniform draw, exposed for probes that need extra random scalars.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }
}
