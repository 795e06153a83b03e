//! Living-standards measurement from satellite-style imagery.
//!
//! The crate composites raw scenes into clean village tiles, trains a small
//! residual CNN on census asset vectors, transfers its representation to
//! survey outcomes and across census rounds, and evaluates with
//! distribution-alignment transforms. A deterministic synthetic world
//! provides ground truth for every stage.

pub mod compositing;
pub mod container;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod pipeline;
pub mod raster;
pub mod store;
pub mod synth;
pub mod tabular;
pub mod temporal;
pub mod transfer;

pub use error::{Error, Result};
