//! Multiple-sclerosis lesion detection on single MRI slices: skull
//! stripping, SLIC superpixels, wavelet texture moments, PCA and an SVM,
//! with cross-validated evaluation and a synthetic phantom generator.
//!
//! Numeric code is generic over [`num::Float`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the pipeline uses throughout.

pub mod brainx;
pub mod config;
pub mod dwt;
pub mod error;
pub mod evalx;
pub mod imgcore;
pub mod num;
pub mod pca;
pub mod phantom;
pub mod pipeline;
pub mod slic;
pub mod svm;
pub mod texfeat;

pub use error::{Error, Result};

pub type GrayImage = imgcore::Raster<f64>;
pub type SuperpixelMap = slic::LabelMap<f64>;
pub type Subbands = dwt::SubbandSet<f64>;
pub type Features = texfeat::FeatureMatrix<f64>;
pub type Pca = pca::PcaModel<f64>;
pub type Svm = svm::SvmModel<f64>;
