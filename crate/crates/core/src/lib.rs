//! Numerical laboratory for blowing-up solutions of the anisotropic
//! almost-critical problem -div_g(a grad u) + a h u = a u^(2*-1-eps) on a
//! Riemannian chart: bubble calculus, chart geometry, the reduced energy and a
//! discretized Lyapunov-Schmidt solver.

// NaN-aware comparisons like !(x > 0.0) are intentional throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bubble;
pub mod checks;
pub mod cli;
pub mod config;
pub mod discrete;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod suites;

pub use error::{BlabError, Result};
