//! Robust M-estimation for separable nonlinear regression models
//! `y = β′h(x, α) + e`.
//!
//! - [`loss`]: ρ-functions (square, Huber, bisquare) and an axiom checker.
//! - [`model`]: the separable model trait and built-in models.
//! - [`solver`]: variable-projection fitting (IRLS inner, Nelder–Mead outer).
//! - [`diagnostics`]: sampled checks of the consistency conditions A–G.
//! - [`simlab`]: seeded Monte Carlo consistency and robustness experiments.
//! - [`cli`]: file formats, configuration and command dispatch.

pub mod error;
pub mod loss;
pub mod model;
pub mod solver;
pub mod diagnostics;
pub mod simlab;
pub mod cli;

pub use error::{Error, Result};
pub use loss::{LossFunction, Rho};
pub use model::{ParameterPoint, SeparableModel};
pub use solver::{Dataset, FitConfig, FitResult};
