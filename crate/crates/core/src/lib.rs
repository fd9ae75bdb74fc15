//! Two-compartment discontinuous Galerkin simulator for Ran-mediated
//! nuclear import.

pub mod assembly;
pub mod dg;
pub mod error;
pub mod geometry;
pub mod kinetics;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod output;
pub mod sim;
pub mod time;

pub use error::{Error, Result};
