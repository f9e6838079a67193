pub mod data;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};
