//! Maps of fair-division instances.
//!
//! The crate generates allocation instances (row-stochastic utility
//! matrices), measures distances between them, lays collections out in the
//! plane either by multidimensional scaling or by the two largest singular
//! values, and annotates each instance with exactly computed fairness
//! features.

#![allow(clippy::needless_range_loop)]

pub mod assignment;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod features;
pub mod generators;
pub mod io;
pub mod jacobi;
pub mod matrix;
pub mod numeric;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod spectral;

pub use distance::{DistanceMatrix, Metric};
pub use embedding::Embedding;
pub use error::Error;
pub use features::FeatureRecord;
pub use generators::{CharacteristicKind, IidDistribution, Model, SyntheticSpec};
pub use matrix::{InstanceRecord, MatrixError, Source, UtilityMatrix};
pub use spectral::SpectralPoint;
