//! Solver and measurement core for the fully nonlinear thin obstacle
//! (Signorini) problem on the unit ball: a convex Bellman operator
//! `F(D^2 u) = sup_g (tr(L_g D^2 u) + c_g)` solved off a constrained
//! hyperplane `{x_n = 0}` with a monotone finite-difference scheme, plus
//! the derivative, jump and Hölder-exponent diagnostics used to study the
//! regularity of the solution and of the normal-derivative jump across
//! the plane.
//!
//! The crate is `no_std` + `alloc`; everything that touches files, clocks
//! or threads lives in the companion `signorini-lab` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod grid;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod regularity;
pub mod solver;

pub use grid::{Grid, GridSpec, NodeClass, ScalarField};
pub use operators::{BellmanFamily, LinearOperator, NormalizationResult};
pub use solver::{SolveOptions, SolveReport, SweepMode, ThickObstacleSpec, ThinObstacleSpec};
