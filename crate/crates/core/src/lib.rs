//! Data-driven optimal control in the space of densities.
//!
//! The pipeline estimates Koopman and Perron-Frobenius generators of a
//! control-affine system from trajectory data ([`gedmd`]), assembles a
//! discounted-cost optimal control problem over rational densities
//! `rho = a / b^alpha`, `rho_bar = c / b^alpha` ([`ocpsynth`]), compiles
//! it to a semidefinite program through sum-of-squares relaxations
//! ([`soscompile`], [`conic`]) and recovers the feedback `k = c / a`
//! ([`ctrl`]).

extern crate openblas_src;

pub mod conic;
pub mod ctrl;
pub mod dynsim;
pub mod error;
pub mod gedmd;
mod matio;
pub mod ocpsynth;
pub mod pipeline;
pub mod polybasis;
pub mod soscompile;

pub use error::{Error, Result};
