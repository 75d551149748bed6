//! Emerald stone grading from white-background photographs: segmentation,
//! 24-value statistical feature extraction, supervised classification,
//! unsupervised clustering and feature-ranking experiments.
//!
//! The numeric core (histograms, GLCM statistics, features, learners) is
//! generic over the [`Real`] scalar; every generic type defaults to `f64`,
//! which is what the pipeline and CLI run.

pub mod color;
pub mod error;
pub mod features;
pub mod imaging;
pub mod learning;
pub mod num;
pub mod pipeline;
pub mod ranking;
pub mod synth;
pub mod texture;

pub use error::{Error, Result};
pub use features::{FeatureVector, NUM_CATEGORIES, NUM_FEATURES};
pub use num::Real;

/// Single-precision aliases of the core types; the default type parameter
/// everywhere is `f64`.
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type Histogram32 = color::Histogram<f32>;
pub type Glcm32 = texture::Glcm<f32>;
pub type Dataset32 = learning::Dataset<f32>;
pub type Model32 = learning::Model<f32>;
pub type Clustering32 = learning::Clustering<f32>;
