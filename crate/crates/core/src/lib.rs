//! Clustering toolkit for binary programs (malware and benign) described by
//! static feature vectors.
//!
//! The pipeline runs feature elimination, a three-stage scaling chain,
//! dimensionality reduction (PCA or a shallow autoencoder), one of four
//! clustering algorithms with test-set prediction, and entropy-based
//! evaluation. [`harness`] drives grids of such runs.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar type for the common cases.

pub mod blob;
pub mod cluster;
pub mod dataset;
pub mod embed;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod preprocess;
pub mod scalar;

pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset64 = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Pipeline64 = preprocess::PreprocessPipeline<f64>;
pub type PcaModel64 = embed::PcaModel<f64>;
pub type AutoencoderModel64 = embed::AutoencoderModel<f64>;
pub type KMeansModel64 = cluster::KMeansModel<f64>;
pub type BirchModel64 = cluster::BirchModel<f64>;
pub type DbscanModel64 = cluster::DbscanModel<f64>;
pub type HacModel64 = cluster::HacModel<f64>;
pub type ClusterModel64 = cluster::ClusterModel<f64>;
