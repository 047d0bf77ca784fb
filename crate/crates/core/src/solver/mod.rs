//! Discretized Lyapunov-Schmidt reduction.

pub mod krylov;
pub mod ls;
pub mod reduced;
pub mod verify;
