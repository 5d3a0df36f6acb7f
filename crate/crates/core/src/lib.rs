//! Point-vortex perturbation solver with inviscid-damping diagnostics.

pub mod config;
pub mod coordinates;
pub mod dynamics;
pub mod energies;
pub mod error;
pub mod gevrey;
pub mod grid;
pub mod interp;
pub mod linear_oracle;
pub mod poisson;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod run;
pub mod snapshot;
pub mod weights;

pub use error::{Error, Result};
