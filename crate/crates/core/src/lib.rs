//! Hypocoercivity analysis for finite-dimensional and spectrally truncated
//! dissipative generators `C = R - J`.

pub mod decay;
pub mod error;
pub mod gallery;
pub mod index;
pub mod io;
pub mod lorentz;
pub mod operator;
pub mod random;
pub mod staircase;

pub use error::{HypoError, Result};
pub use operator::{ComplexMatrix, ComplexVector, OperatorDecomposition, RealMatrix};
