pub mod analytic;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod propagator;
pub mod spin_algebra;

pub use error::{Error, Result};
