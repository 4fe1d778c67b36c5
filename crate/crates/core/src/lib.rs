//! Simulation and verification of weak-value measurement protocols when the
//! primary system is exposed to noise.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs plus an explicit seed where randomness is involved.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channels;
pub mod error;
pub mod haar;
pub mod learning;
pub mod lindblad;
pub mod linalg;
pub mod protocols;
pub mod random;
pub mod state;
pub mod weakvalue;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;
pub use state::{DensityMatrix, HermitianOperator, PureState, SpectralDecomposition};
