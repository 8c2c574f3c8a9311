//! Geometry of adversarial robustness on low-dimensional data manifolds.
//!
//! Synthetic class manifolds (concentric spheres, parallel flats) with exact
//! distances, sampling covers, closed-form bounds, nearest-neighbour and
//! multilayer-perceptron classifiers, and the attacks used to probe them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod bounds;
pub mod classifier;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod knn;
pub mod mlp;
pub mod norm;
pub mod plot;
pub mod rng;
pub mod sampling;

pub use classifier::Classifier;
pub use error::{Error, Result};
pub use geometry::{Family, ManifoldSpec};
pub use knn::{Acceleration, NnIndex};
pub use mlp::{MlpModel, PgdConfig, TrainConfig};
pub use norm::NormKind;
pub use sampling::LabeledDataset;
