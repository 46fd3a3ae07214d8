//! Loschmidt amplitudes, geometric phases and dynamical topological order
//! parameters for sudden quenches of mixed states.

pub mod band;
pub mod error;
pub mod numeric;
pub mod quench;
pub mod spin;

pub use error::{Error, Result};
pub use numeric::{Angle, HermitianMatrix, UnitaryMatrix};
pub use spin::{SpinDirection, SpinJ, Temperature};
