//! Hazard rate estimation for doubly truncated lifetimes.

pub mod bandwidth;
pub mod bootstrap;
pub mod data;
pub mod error;
pub mod fit;
pub mod graph;
pub mod kernel;
pub mod npmle;
pub mod optim;
pub mod parametric;
pub mod quadrature;
pub mod simulation;

pub use data::{Observation, Sample, WeightedDF};
pub use error::{Error, Result};
pub use fit::{CorrectedFit, Correction};
