//! Numerical lab for the speed of convergence in the renewal theorem.
//!
//! Modules mirror the workflow: [`measure`] evaluates Fourier-Laplace
//! transforms, [`zeros`] localizes solutions of rho_hat(z) = 1,
//! [`diophantine`] estimates how fast 1 - rho_hat(ib) can approach zero,
//! [`renewal`] computes H, R, G*f and T_lambda*f, [`speed`] fits the decay of
//! (G - T_lambda)*f, and [`weights`] studies Laplace transforms of
//! sub-exponential weights. [`cli`] runs all of it from config files.

pub mod cli;
pub mod diophantine;
pub mod error;
pub mod measure;
pub mod quad;
pub mod renewal;
pub mod speed;
pub mod testfn;
pub mod weights;
pub mod zeros;

pub use error::{LabError, Result};
pub use measure::{MomentData, ProbabilityMeasure};
pub use num_complex::Complex64;

/// The golden ratio.
pub const GOLDEN: f64 = 1.618_033_988_749_894_8;
