pub mod affinity;
pub mod cli;
pub mod clustering;
pub mod consistency;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipelines;
pub mod plot;
pub mod spectral;
mod serde_inf;

pub use error::{Error, Result};
