//! Numerical laboratory for randomly kicked parabolic equations on the torus
//! driven by degenerate Haar coloured noise: spectral solver, equilibria and
//! Lyapunov structure, saturation and Gramian tests, adjoint steering,
//! random-walk calculus and Monte Carlo mixing diagnostics.

pub mod basis;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod equilibria;
pub mod haar;
pub mod linalg;
pub mod linearization;
pub mod mixing;
pub mod pde;
pub mod report;
pub mod saturation;
pub mod steering;
pub mod walk;

pub use error::{Error, Result};
