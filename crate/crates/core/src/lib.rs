//! Numerical machinery for the gauge-broken extended constant scalar curvature
//! system on the Poincaré ball model of hyperbolic space.
//!
//! A metric `g = g0 + h` is sought with `Ric(g) + (n-1) g - L_g(B_g(g0)) = S`
//! and `div_g S = 0`, where `S = T - (1/n) Tr_g(T) g + L̊ ξ` is built from a
//! prescribed symmetric source `T` and an unknown one-form `ξ`. Any solution
//! has scalar curvature `-n(n-1)`.
//!
//! The crate is `no_std` (it needs `alloc`). Layers, bottom up:
//!
//! * [`grid`], [`background`], [`field`]: masked Cartesian grid over the
//!   truncated ball, finite-difference stencils, tensor field storage, norms.
//! * [`curvature`]: Christoffel symbols and the curvature stack of any metric.
//! * [`operators`]: Laplacians, divergences, (conformal) Killing operators,
//!   the gauge operator.
//! * [`constraint`]: source tensors, the nonlinear residual, its analytic
//!   linearization and numeric Jacobian probes.
//! * [`solver`]: Krylov solves and the outer nonlinear iterations.
//! * [`verify`]: executable checks of the geometric identities.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod background;
pub mod constraint;
pub mod curvature;
pub mod error;
pub mod field;
pub mod grid;
pub mod krylov;
mod math;
pub mod operators;
pub mod sample;
pub mod solver;
pub mod tensor;
pub mod verify;

pub use background::BackgroundGeometry;
pub use error::{Error, Result};
pub use field::{Field, OneFormField, Region, Repr, ScalarField, SymTensor2Field, WeightedNorm};
pub use grid::{FdOrder, FieldGrid, NodeClass};

/// Largest spatial dimension supported by the per-node linear algebra.
pub const MAX_DIM: usize = 4;

/// Radius of the ball on which analytic identities are checked.
pub const CORE_RADIUS: f64 = 0.7;
