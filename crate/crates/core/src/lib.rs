//! Least-squares curve fitting through a QUBO formulation with fixed-point
//! coefficient encoding, exact and heuristic binary solvers, and fitted value
//! iteration for a just-in-time-arrival control problem.

pub mod basis;
pub mod data;
pub mod dynprog;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod leastsq;
pub mod solvers;

pub use error::{Error, Result};
