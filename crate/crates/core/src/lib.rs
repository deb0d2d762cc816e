//! Weakly nonlinear surface waves on the interface between an incompressible
//! MHD plasma and a vacuum governed by Maxwell's equations.
//!
//! The crate is organised along the computation:
//!
//! * [`params`]: reference state, frequencies, derived coefficients, stability checks
//! * [`dispersion`]: real roots of the Lopatinskii determinant and the Laplace symbol
//! * [`kernel`]: the Hamilton kernel and the quadratic spectral sum
//! * [`amplitude`]: pseudo-spectral solver for the nonlocal front equation
//! * [`profiles`]: system matrices, eigenvectors and the leading surface-wave profile
//! * [`residual`]: WKB approximate solution, its residuals and the rectification indicator
//! * [`cli`]: configuration-driven command line front end

pub mod amplitude;
pub mod cli;
pub mod dispersion;
pub mod error;
pub mod kernel;
pub mod params;
pub mod profiles;
pub mod residual;

pub mod fft2;
pub mod jsonfmt;

pub use error::{Error, Result};
