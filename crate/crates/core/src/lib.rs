//! Numerical laboratory for self-similarly shrinking solitons of the
//! Yang-Mills flow on flat space.
//!
//! Connections take values in so(r) and live on a regular lattice over a
//! truncated box [-R, R]^n with 2 <= n <= 6. The crate provides:
//!
//! * so(r) kernels ([`algebra`]),
//! * lattice fields and the differential operators that build curvature,
//!   covariant derivatives, and the exterior/interior calculus ([`fields`]),
//! * Gaussian-weighted quadrature, the shrinker functional, and its entropy
//!   ([`quadrature`], [`functionals`]),
//! * first and second variation machinery with the stability operator
//!   ([`variations`]),
//! * a matrix-free low-end eigensolver and the stability verdict ([`spectral`]),
//! * the Yang-Mills flow with monotonicity diagnostics and blow-up tooling
//!   ([`flow`]),
//! * integral identities, obstruction experiments, and descent checks
//!   ([`verify`]),
//! * a Gauss-Newton soliton solver ([`solve`]),
//! * bit-exact field archives ([`archive`]).
//!
//! Floating point reductions in report-bearing paths run through a fixed
//! pairwise tree ([`sum`]) so identical inputs produce identical bits
//! regardless of worker count.

pub mod algebra;
pub mod archive;
pub mod error;
pub mod fields;
pub mod flow;
pub mod functionals;
pub mod quadrature;
pub mod solve;
pub mod spectral;
pub mod sum;
pub mod variations;
pub mod verify;

pub use error::{Error, Result};
