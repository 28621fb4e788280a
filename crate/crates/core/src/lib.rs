//! Multiscale simulation of follower-leader swarms.
//!
//! Three levels of description share one set of kernels and fields:
//!
//! * [`microsim`]: stochastic agents. Followers and passive leaders perform
//!   velocity jumps, streakers fly ballistically towards the nest, and leaders
//!   switch roles at the front and rear edges of the swarm.
//! * [`macrosolvers`]: the angle-resolved kinetic system and its parabolic and
//!   hyperbolic macroscopic limits, for homogeneous and inhomogeneous
//!   alignment kernels.
//! * [`harness`]: configuration, scenario presets, run orchestration and
//!   cross-scale comparison, driven by the `swarm` binary.
//!
//! [`kernels`] computes every closure coefficient by quadrature and
//! [`fields`] holds the spatial grid machinery.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod fields;
pub mod harness;
pub mod kernels;
pub mod macrosolvers;
pub mod microsim;
pub mod params;

pub use error::{Error, Result};
pub use exec::Parallelism;
