//! Projection-free solvers for functional-constrained optimization.
//!
//! The crate is `no_std` (with `alloc`) and covers the algorithmic core:
//!
//! * [`geometry`]: compact convex sets, their linear minimization oracles
//!   and the simplex prox step used on the dual side.
//! * [`oracle`]: first-order function oracles, affine minorants and the
//!   smoothing of hinge / group-max terms.
//! * [`cgo`]: the conditional gradient oracle for
//!   `min_{x in X} max_{z in simplex} f(x) + <h(x), z>`, certifying lower
//!   and upper bounds on the saddle value.
//! * [`level`]: the level-set outer loops (LCG from below, MLCG from above)
//!   for `min f(x) s.t. h(x) <= 0, x in X`.
//! * [`nonconvex`]: the inexact proximal-point wrapper (IPP-LCG) and the
//!   direct nonconvex conditional gradient method (DNCG).
//! * [`models`]: risk-averse sparse portfolio and IMRT formulations.
//! * [`verify`]: brute-force grid oracles used to check the solvers.
//!
//! IO, CSV/JSON formats and the command line live in the `levelcg` crate.
#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod vecops;

pub mod cgo;
pub mod geometry;
pub mod level;
pub mod models;
pub mod nonconvex;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
