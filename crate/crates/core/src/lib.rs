//! Simulation and verification toolkit for compressible reactive multicomponent
//! Stokes mixtures on a periodic interval.

pub mod check;
pub mod compactness;
pub mod diagnostics;
pub mod entropy;
pub mod error;
pub mod flux;
pub mod io;
pub mod mixture;
pub mod oracle;
pub mod sampling;
pub mod solver;
pub mod spectral;

pub use error::{AlgebraError, DiagnosticsError, IoError, MixtureError, SolverError};
