//! Scalar abstraction for the numeric parts of the pipeline.
//!
//! Feature values, histograms, GLCM statistics and the learners are generic
//! over [`Real`] so the same code runs in `f32` or `f64`. The pipeline and
//! CLI default to `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Floating-point scalar used throughout the feature and learning code.
pub trait Real:
    Float + NumAssignOps + Sum<Self> + Default + Debug + Display + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn from_usize(n: usize) -> Self;
    fn into_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn into_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn into_f64(self) -> f64 {
        self
    }
}
