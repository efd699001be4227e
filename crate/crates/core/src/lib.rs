//! ℤ₂ indices of time-reversal symmetric lattice insulators, the symmetric
//! Wold decomposition of unitary/projection pairs, and edge diagnostics.

pub mod bulk;
pub mod edge;
pub mod error;
pub mod index;
pub mod lattice;
pub mod operator;
pub mod spectra;
pub mod wold;

pub use error::{Error, Result};
