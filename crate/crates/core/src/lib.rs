//! Regional vulnerability indices from a region-by-variable table.
//!
//! The pipeline omits unpopulated regions, imputes gaps from contiguous
//! neighbors, screens variables for skewness and collinearity, builds
//! indices from correlation-matrix principal components, clusters regions
//! with k-means and checks how stable the clusters are across seeds.

pub mod cluster;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod profile;
pub mod select;
pub mod spatial;
pub mod synthetic;

pub use error::{Error, Result};
