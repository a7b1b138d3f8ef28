//! Numerical thermodynamics from maximum-entropy inference.
//!
//! - [`measure`]: quadrature measures, densities, observables, relative entropy
//! - [`maxent`]: Gibbs densities, log-partition function, multiplier fitting
//! - [`gasmodels`]: ideal-gas and van der Waals closed forms, first-law checks
//! - [`maxwell`]: isotherm branches, equal-area pressure, graph selector
//! - [`kinetic`]: free-transport evolution and conservation diagnostics
//! - [`cli`]: the `thermoscope` command-line front end

pub mod cli;
pub mod error;
pub mod gasmodels;
pub mod kinetic;
pub mod measure;
pub mod maxent;
pub mod maxwell;
pub mod quad;
pub mod roots;

mod interp;

pub use error::{Error, Result};
