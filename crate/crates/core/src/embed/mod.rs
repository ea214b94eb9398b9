//! Low-dimensional representations of preprocessed features.

mod autoencoder;
mod pca;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blob::{self, BlobError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use autoencoder::{
    compare_gradients, fit_autoencoder, gradient_check, train_autoencoder, Activation, AutoencoderModel, Gradients,
};
pub use pca::{fit_pca, PcaModel};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"BCE1";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid component count {k} for n={n}, d={d}")]
    InvalidK { k: usize, n: usize, d: usize },
    #[error("dimension mismatch: expected width {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("reconstruction loss became non-finite in epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Blob(#[from] BlobError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    Pca,
    #[serde(alias = "ae")]
    Autoencoder,
}

impl EmbedMethod {
    pub fn short_name(self) -> &'static str {
        match self {
            EmbedMethod::Pca => "pca",
            EmbedMethod::Autoencoder => "ae",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub method: EmbedMethod,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub activation: Activation,
}

fn default_epochs() -> usize {
    30
}
fn default_batch() -> usize {
    64
}
fn default_lr() -> f64 {
    0.05
}

impl EmbedConfig {
    pub fn pca(k: usize) -> Self {
        Self {
            method: EmbedMethod::Pca,
            k,
            ..Self::autoencoder(k, 0)
        }
    }

    pub fn autoencoder(k: usize, seed: u64) -> Self {
        Self {
            method: EmbedMethod::Autoencoder,
            k,
            seed,
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            activation: Activation::Relu,
        }
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.method.short_name(), self.k)
    }
}

/// A fitted representation of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum EmbeddingModel<T> {
    Pca(PcaModel<T>),
    Autoencoder(AutoencoderModel<T>),
}

impl<T: Scalar> EmbeddingModel<T> {
    pub fn fit(data: &Matrix<T>, cfg: &EmbedConfig) -> Result<Self, EmbedError> {
        match cfg.method {
            EmbedMethod::Pca => fit_pca(data, cfg.k).map(Self::Pca),
            EmbedMethod::Autoencoder => fit_autoencoder(data, cfg).map(Self::Autoencoder),
        }
    }

    pub fn transform(&self, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
        match self {
            Self::Pca(m) => m.transform(data),
            Self::Autoencoder(m) => m.encode(data),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::Pca(m) => m.k(),
            Self::Autoencoder(m) => m.k(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        Ok(blob::save(path, EMBEDDING_MAGIC, self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        Ok(blob::load(path, EMBEDDING_MAGIC)?)
    }
}

pub fn pca_transform<T: Scalar>(m: &PcaModel<T>, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
    m.transform(data)
}

pub fn pca_inverse_transform<T: Scalar>(m: &PcaModel<T>, codes: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
    m.inverse_transform(codes)
}

pub fn ae_encode<T: Scalar>(m: &AutoencoderModel<T>, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
    m.encode(data)
}
