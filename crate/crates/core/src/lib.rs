//! Numerical geometry of surfaces in the homogeneous spaces E(kappa, tau).

pub mod ambient;
pub mod canonical;
pub mod cli;
pub mod error;
pub mod surface;
pub mod verify;
pub mod willmore;

pub use error::{Error, Result};
