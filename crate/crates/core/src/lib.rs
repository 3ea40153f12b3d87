//! Pseudo-spectral Galerkin solver and diagnostics for the damped wave
//! equation `∂ₜ²u + γ∂ₜu - Δu + f(u) = g` on `(0, π)^d` with Dirichlet
//! boundary conditions.

pub mod attractor;
pub mod diagnostics;
pub mod error;
pub mod nonlinearity;
pub mod output;
pub mod random;
pub mod solver;
pub mod spectral;
pub mod splitting;

pub use error::{Error, Result};
pub use nonlinearity::{AssumptionCertificate, AssumptionId, NonlinearitySpec};
pub use solver::{ProblemSpec, Trajectory};
pub use spectral::{make_basis, Basis, CoeffField, Grid, StatePair};
