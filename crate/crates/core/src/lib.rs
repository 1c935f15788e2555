//! Finite-dimensional geometric mechanics.
//!
//! Lie-Poisson and Euler-Poincare dynamics for rigid bodies (so(3), so(n),
//! the symmetric form and the Manakov deformation), the heavy top, axisymmetric
//! ray optics, 1D EPDiff pulsons and geodesic flows, together with the
//! numerical machinery used to check their conservation laws: a fixed-step RK4
//! integrator, an invariant-drift monitor and finite-difference brackets.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod epdiff1d;
mod error;
pub mod geodesics;
pub mod heavy_top;
pub mod integrate;
pub mod lie_poisson;
pub mod ray_optics;
pub mod rigid_body;

pub use algebra::{MatN, SkewCheck, Vec3};
pub use error::{Error, Result};
pub use integrate::{DriftReport, FnSystem, IntegratorConfig, Invariant, OdeSystem, Trajectory};
