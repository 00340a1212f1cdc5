//! Numerical laboratory for Kolmogorov operators L = Δ + (∇μ/μ)·∇ and
//! their squares A = L² on L²(dμ).

pub mod config;
pub mod discrete;
pub mod error;
pub mod hermite;
pub mod inequalities;
pub mod jet;
pub mod kernels;
pub mod measures;
pub mod operator;
pub mod positivity;
pub mod quad;
pub mod run;
pub mod semigroup;

pub use error::{Error, Result};
