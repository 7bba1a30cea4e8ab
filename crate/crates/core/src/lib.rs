//! Reconstruction of complex source terms in the linear 2-D Ginzburg–Landau
//! equation
//!
//! ```text
//!   ∂t y − (a + ib) Δy + p y = f    in (0,Lx)×(0,Ly)×(0,T),   y = 0 on the boundary,
//! ```
//!
//! from a single final-time observation `y(·,T)`. The source is recovered by
//! minimizing a Tikhonov-regularized terminal-tracking functional with
//! adjoint gradients and a Polak–Ribière⁺ nonlinear conjugate gradient method.
//!
//! The crate is `no_std` (with `alloc`); disable the default `std` feature to
//! build without the standard library. IO, configuration and the command-line
//! front end live in the `glinv` companion crate.
//!
//! Module map:
//! - [`mesh`]: grids, discrete Laplacians, fields and weighted inner products.
//! - [`sparse`]: compressed sparse row matrices.
//! - [`linsolve`]: Crank–Nicolson operators and the banded LU used to solve them.
//! - [`pde`]: forward trajectories and the time-reversed adjoint recursion.
//! - [`inverse`]: objective, adjoint gradients, finite-difference checks.
//! - [`optimize`]: PR⁺ nonlinear conjugate gradient with Armijo backtracking.
//! - [`experiments`]: benchmark sources, synthetic data, noise, metrics,
//!   table configurations and the manufactured-solution convergence study.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod experiments;
pub mod inverse;
pub mod linsolve;
pub mod mesh;
pub mod optimize;
pub mod pde;
pub mod sparse;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use inverse::{Control, GradientMode, InverseProblem};
pub use linsolve::{CnOperators, CnParams, Factorization};
pub use mesh::{Field, Grid2D, SpaceTimeField};
pub use optimize::{NcgConfig, RunReport, StopReason};
pub use pde::{AdjointTrajectory, ForcingRule, Trajectory};
