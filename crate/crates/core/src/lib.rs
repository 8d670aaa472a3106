//! Thermodynamics of driven closed quantum systems with the irreversible
//! entropy production split into a coherent and an incoherent part.
//!
//! Units: `hbar = k_B = 1`, entropies in nats.

pub mod dynamics;
pub mod error;
pub mod fluctuation;
pub mod linalg;
pub mod models;
pub mod random;
pub mod thermo;

pub use error::{Error, Result};
