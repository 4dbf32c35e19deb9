//! Solvers for generalized packing integer programs (GPIP).
//!
//! A GPIP maximizes `c1'x + c2'y` over nonnegative integers subject to
//! `Ax <= By`, `Ux <= u`, `Vy <= v` with coefficients in `[0, 1]` and
//! right-hand sides at least 1. The crate provides:
//!
//! - [`model`]: instance types, validation, normalization, feasibility;
//! - [`lp`]: the LP relaxation and an internal bounded-variable simplex;
//! - [`rounding`]: scale-and-sample randomized rounding with tail bounds;
//! - [`pessimistic`]: deterministic rounding driven by a pessimistic
//!   estimator, parameter calibration, and the end-to-end [`pessimistic::solve`]
//!   pipeline;
//! - [`exact`]: a branch-and-bound oracle for small instances;
//! - [`diet`]: a compiler lowering a multi-period meal-planning model
//!   (ingredient purchasing with two-period perishability, prep-time and
//!   budget limits) into GPIP form, and a decoder back to meal plans;
//! - [`harness`]: synthetic catalogs and the gap/runtime experiment runner.
//!
//! Each major capability has a runnable program under `examples/`; the thin
//! `gpip` binary exposes the same operations as subcommands.
//!
//! Instances are immutable after construction and every solver entry point
//! is a pure function of its inputs (sampling included, via explicit
//! seeds), so distinct solves can run on separate threads without
//! coordination and repeated runs reproduce bit-identical results.

pub mod diet;
pub mod error;
pub mod exact;
pub mod harness;
pub mod lp;
pub mod matrix;
pub mod model;
pub mod pessimistic;
pub mod rounding;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{BinarySolution, GpipInstance, RawInstance};
