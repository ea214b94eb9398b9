//! K-Means, BIRCH, DBSCAN and agglomerative clustering behind a uniform
//! fit / predict contract. All distances are Euclidean.

mod assignment;
mod birch;
mod dbscan;
mod hac;
mod kdtree;
mod kmeans;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blob::{self, BlobError};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

pub use assignment::Assignment;
pub use birch::{default_threshold, fit_birch, predict_birch, BirchModel, BirchNode, ClusteringFeature};
pub use dbscan::{fit_dbscan, predict_dbscan, DbscanModel};
pub use hac::{fit_hac, linkage, predict_hac, Dendrogram, HacModel, Linkage, Merge};
pub use kdtree::KdTree;
pub use kmeans::{fit_kmeans, predict_kmeans, KMeansModel};

pub const KMEANS_MAGIC: &[u8; 4] = b"BCK1";
pub const BIRCH_MAGIC: &[u8; 4] = b"BCB1";
pub const DBSCAN_MAGIC: &[u8; 4] = b"BCD1";
pub const HAC_MAGIC: &[u8; 4] = b"BCH1";

pub const DEFAULT_MIN_PTS: usize = 5;
pub const DEFAULT_BRANCHING: usize = 50;
pub const DEFAULT_HAC_SUBSET: usize = 20_000;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{n} samples cannot form {k} clusters")]
    TooFewSamples { n: usize, k: usize },
    #[error("dimension mismatch: model expects width {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("HAC subset of {subset} must satisfy n_clusters ({k}) <= subset <= n ({n})")]
    SubsetTooSmall { subset: usize, k: usize, n: usize },
    #[error(transparent)]
    Blob(#[from] BlobError),
}

pub(crate) fn check_width<T: Scalar>(expected: usize, data: &Matrix<T>) -> Result<(), ClusterError> {
    if data.cols() != expected {
        return Err(ClusterError::DimensionMismatch {
            expected,
            found: data.cols(),
        });
    }
    Ok(())
}

/// Index of the nearest row of `centers` and its squared distance. Ties go
/// to the lowest index.
#[inline]
pub fn nearest<T: Scalar>(point: &[T], centers: &Matrix<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in centers.iter_rows().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Algorithm choice plus its parameters. Optional fields fall back to the
/// documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum ClusterParams {
    Kmeans {
        k: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Birch {
        k: usize,
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default = "default_branching")]
        branching: usize,
    },
    Dbscan {
        eps: f64,
        #[serde(default = "default_min_pts")]
        min_pts: usize,
    },
    Hac {
        k: usize,
        #[serde(default)]
        subset_size: Option<usize>,
        #[serde(default)]
        linkage: Linkage,
    },
}

pub(crate) fn default_max_iter() -> usize {
    300
}
pub(crate) fn default_tol() -> f64 {
    1e-6
}
pub(crate) fn default_branching() -> usize {
    DEFAULT_BRANCHING
}
pub(crate) fn default_min_pts() -> usize {
    DEFAULT_MIN_PTS
}

impl ClusterParams {
    pub fn kmeans(k: usize) -> Self {
        ClusterParams::Kmeans {
            k,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }

    pub fn algo_name(&self) -> &'static str {
        match self {
            ClusterParams::Kmeans { .. } => "kmeans",
            ClusterParams::Birch { .. } => "birch",
            ClusterParams::Dbscan { .. } => "dbscan",
            ClusterParams::Hac { .. } => "hac",
        }
    }

    pub fn fit<T: Scalar>(&self, data: &Matrix<T>, seed: u64) -> Result<(ClusterModel<T>, Assignment), ClusterError> {
        Ok(match *self {
            ClusterParams::Kmeans { k, max_iter, tol } => {
                let (m, a) = fit_kmeans(data, k, seed, max_iter, tol)?;
                (ClusterModel::KMeans(m), a)
            }
            ClusterParams::Birch {
                k,
                threshold,
                branching,
            } => {
                let threshold = match threshold {
                    Some(t) => t,
                    None => default_threshold(data, seed),
                };
                let (m, a) = fit_birch(data, threshold, branching, k)?;
                (ClusterModel::Birch(m), a)
            }
            ClusterParams::Dbscan { eps, min_pts } => {
                let (m, a) = fit_dbscan(data, eps, min_pts)?;
                (ClusterModel::Dbscan(m), a)
            }
            ClusterParams::Hac {
                k,
                subset_size,
                linkage,
            } => {
                let subset = subset_size.unwrap_or(DEFAULT_HAC_SUBSET).min(data.rows());
                let (m, a) = fit_hac(data, k, subset, linkage, seed)?;
                (ClusterModel::Hac(m), a)
            }
        })
    }
}

/// Any fitted clusterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum ClusterModel<T> {
    KMeans(KMeansModel<T>),
    Birch(BirchModel<T>),
    Dbscan(DbscanModel<T>),
    Hac(HacModel<T>),
}

impl<T: Scalar> ClusterModel<T> {
    pub fn predict(&self, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
        match self {
            ClusterModel::KMeans(m) => m.predict(data),
            ClusterModel::Birch(m) => m.predict(data),
            ClusterModel::Dbscan(m) => m.predict(data),
            ClusterModel::Hac(m) => m.predict(data),
        }
    }

    /// Number of clusters the model can emit (excluding noise).
    pub fn n_clusters(&self) -> usize {
        match self {
            ClusterModel::KMeans(m) => m.centroids.rows(),
            ClusterModel::Birch(m) => m.n_clusters,
            ClusterModel::Dbscan(m) => m.n_clusters(),
            ClusterModel::Hac(m) => m.n_clusters,
        }
    }

    fn magic(&self) -> &'static [u8; 4] {
        match self {
            ClusterModel::KMeans(_) => KMEANS_MAGIC,
            ClusterModel::Birch(_) => BIRCH_MAGIC,
            ClusterModel::Dbscan(_) => DBSCAN_MAGIC,
            ClusterModel::Hac(_) => HAC_MAGIC,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClusterError> {
        let magic = self.magic();
        match self {
            ClusterModel::KMeans(m) => blob::save(path, magic, m)?,
            ClusterModel::Birch(m) => blob::save(path, magic, m)?,
            ClusterModel::Dbscan(m) => blob::save(path, magic, m)?,
            ClusterModel::Hac(m) => blob::save(path, magic, m)?,
        }
        Ok(())
    }

    /// Dispatches on the file's magic.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClusterError> {
        let path = path.as_ref();
        let magic = blob::peek_magic(path).map_err(BlobError::from)?.unwrap_or_default();
        Ok(match &magic {
            m if m == KMEANS_MAGIC => ClusterModel::KMeans(blob::load(path, KMEANS_MAGIC)?),
            m if m == BIRCH_MAGIC => ClusterModel::Birch(blob::load(path, BIRCH_MAGIC)?),
            m if m == DBSCAN_MAGIC => ClusterModel::Dbscan(blob::load(path, DBSCAN_MAGIC)?),
            m if m == HAC_MAGIC => ClusterModel::Hac(blob::load(path, HAC_MAGIC)?),
            other => {
                return Err(BlobError::BadMagic {
                    expected: "BCK1|BCB1|BCD1|BCH1".into(),
                    found: String::from_utf8_lossy(other).into_owned(),
                }
                .into())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let c = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [-2.0, 0.0]]).unwrap();
        assert_eq!(nearest(&[1.0, 0.0], &c).0, 0);
        assert_eq!(nearest(&[0.0, 5.0], &c).0, 0);
        assert_eq!(nearest(&[-1.5, 0.0], &c).0, 2);
    }

    #[test]
    fn params_parse_from_toml() {
        let p: ClusterParams = toml::from_str("algo = \"dbscan\"\neps = 0.3\n").unwrap();
        assert_eq!(p, ClusterParams::Dbscan { eps: 0.3, min_pts: 5 });
        let p: ClusterParams = toml::from_str("algo = \"hac\"\nk = 4\nlinkage = \"average\"\n").unwrap();
        assert_eq!(
            p,
            ClusterParams::Hac {
                k: 4,
                subset_size: None,
                linkage: Linkage::Average
            }
        );
    }

    #[test]
    fn model_blobs_round_trip() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [9.0, 0.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let all = [
            ClusterParams::kmeans(2),
            ClusterParams::Birch {
                k: 2,
                threshold: Some(0.5),
                branching: 3,
            },
            ClusterParams::Dbscan { eps: 0.5, min_pts: 2 },
            ClusterParams::Hac {
                k: 3,
                subset_size: Some(4),
                linkage: Linkage::Ward,
            },
        ];
        for (p, magic) in all.iter().zip([KMEANS_MAGIC, BIRCH_MAGIC, DBSCAN_MAGIC, HAC_MAGIC]) {
            let (m, a) = p.fit(&x, 1).unwrap();
            let path = dir.path().join(p.algo_name());
            m.save(&path).unwrap();
            assert_eq!(&std::fs::read(&path).unwrap()[..4], magic);
            let back = ClusterModel::<f64>::load(&path).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(&x).unwrap().len(), a.len());
        }
    }
}
