//! Toy prototype-based image classifiers, part-visualisation methods, and
//! deletion/relevance metrics for checking how faithful those
//! visualisations are.

pub mod cli;
pub mod data;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod model;
pub mod network;
pub mod numerics;
pub mod saliency;

pub use error::{Error, Result};
