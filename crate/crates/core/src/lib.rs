//! Adverse-condition image augmentation, classical enhancement (histogram
//! equalization and single-scale Retinex), and an evaluation harness that
//! measures how enhancement shifts network accuracy on augmented data.
//!
//! Numeric kernels are generic over the scalar type; the aliases below fix
//! the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod dataset;
pub mod enhance;
pub mod error;
pub mod image;
pub mod metrics;
pub mod protocol;
pub mod runner;
pub mod scalar;
pub mod stub;

pub use augment::AugmentKind;
pub use dataset::{DatasetManifest, Task};
pub use enhance::EnhanceKind;
pub use error::{Error, Result};
pub use image::{Histogram256, ImageU8, Rgb};
pub use runner::{MatrixConfig, MatrixReport};
pub use scalar::{Real, Scalar};

pub type HsvPixelF64 = image::HsvPixel<f64>;
pub type HsvPixelF32 = image::HsvPixel<f32>;
pub type HsvImageF64 = enhance::HsvImage<f64>;
pub type PlaneF64 = enhance::Plane<f64>;
pub type PlaneF32 = enhance::Plane<f32>;
pub type SsrConfigF64 = enhance::SsrConfig<f64>;
pub type SsrConfigF32 = enhance::SsrConfig<f32>;
pub type IntermediateImageF64 = augment::IntermediateImage<f64>;
pub type BoxF64 = metrics::BoxXywh<f64>;
pub type DetectionF64 = metrics::Detection<f64>;
pub type GroundTruthF64 = metrics::GroundTruth<f64>;
pub type DetectionResultF64 = metrics::DetectionResult<f64>;
pub type PixelStatsF64 = metrics::PixelStats<f64>;
