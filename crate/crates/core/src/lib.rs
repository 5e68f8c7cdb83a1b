//! Global sensitivity metrics for differentiable models on a normalized
//! hypercube.
//!
//! Five metrics are supported, each with a tensor Gauss-Legendre reference
//! value and a seeded Monte Carlo estimate with bootstrap standard errors:
//!
//! - total sensitivity indices (Sobol'), via Legendre coefficients or
//!   Jansen's estimator,
//! - derivative-based measures `nu_i = E[(df/dx_i)^2]`,
//! - standardized linear-fit coefficients,
//! - components of the first eigenvector of `C = E[grad f grad f^T]`,
//! - activity scores `alpha_i(n) = sum_{j<=n} lambda_j w_ij^2`.

pub mod active;
pub mod analysis;
pub mod benchmarks;
pub mod bootstrap;
pub mod error;
pub mod mc;
pub mod model;
pub mod par;
pub mod quad;
pub mod symeig;

pub use error::{Error, Result};
pub use model::{Model, ParameterSpec};
