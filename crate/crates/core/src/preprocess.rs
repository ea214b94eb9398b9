//! Three-stage scaling chain: robust scaling (median / IQR), z-score
//! standardization, then min-max rescaling. Each stage is fitted on the
//! output of the previous one, on training data only.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blob::{self, BlobError};
use crate::dataset::{Dataset, DatasetError, SplitTag};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const PIPELINE_MAGIC: &[u8; 4] = b"BCP1";

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: pipeline fitted on {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("refusing to fit preprocessing on a test split")]
    FitOnTestData,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Blob(#[from] BlobError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RobustParams<T> {
    pub median: Vec<T>,
    /// Q3 − Q1 with linearly interpolated quartiles.
    pub iqr: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StandardParams<T> {
    pub mean: Vec<T>,
    /// Population standard deviation.
    pub stddev: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MinMaxParams<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PreprocessPipeline<T> {
    pub robust: RobustParams<T>,
    pub standard: StandardParams<T>,
    pub minmax: MinMaxParams<T>,
    pub fitted_dim: usize,
}

/// Zero denominators become 1 so the feature maps to a constant.
#[inline]
fn divisor<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        x
    }
}

/// Quantile with linear interpolation between order statistics; `sorted` must be ascending.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn columns<T: Scalar>(x: &Matrix<T>) -> Vec<Vec<T>> {
    (0..x.cols()).into_par_iter().map(|j| x.column(j)).collect()
}

impl<T: Scalar> PreprocessPipeline<T> {
    pub fn fit(train: &Dataset<T>) -> Result<Self, PreprocessError> {
        if train.split() == SplitTag::Test {
            return Err(PreprocessError::FitOnTestData);
        }
        Self::fit_matrix(train.features())
    }

    pub fn fit_matrix(x: &Matrix<T>) -> Result<Self, PreprocessError> {
        let n = x.rows();
        if n < 2 {
            return Err(PreprocessError::TooFewSamples(n));
        }
        let mut cols = columns(x);

        let (median, iqr): (Vec<T>, Vec<T>) = cols
            .par_iter()
            .map(|c| {
                let mut s = c.clone();
                s.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
                let q1 = quantile_sorted(&s, 0.25);
                let q3 = quantile_sorted(&s, 0.75);
                (quantile_sorted(&s, 0.5), q3 - q1)
            })
            .unzip();
        cols.par_iter_mut().enumerate().for_each(|(j, c)| {
            let s = divisor(iqr[j]);
            c.iter_mut().for_each(|v| *v = (*v - median[j]) / s);
        });

        let nf = T::of_usize(n);
        let (mean, stddev): (Vec<T>, Vec<T>) = cols
            .par_iter()
            .map(|c| {
                let mean = c.iter().copied().sum::<T>() / nf;
                let var = c.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
                (mean, var.sqrt())
            })
            .unzip();
        cols.par_iter_mut().enumerate().for_each(|(j, c)| {
            let s = divisor(stddev[j]);
            c.iter_mut().for_each(|v| *v = (*v - mean[j]) / s);
        });

        let (min, max): (Vec<T>, Vec<T>) = cols
            .par_iter()
            .map(|c| {
                c.iter()
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .unzip();

        Ok(Self {
            robust: RobustParams { median, iqr },
            standard: StandardParams { mean, stddev },
            minmax: MinMaxParams { min, max },
            fitted_dim: x.cols(),
        })
    }

    /// Applies the three stages in order. Values outside the training range
    /// are not clamped.
    pub fn transform_matrix(&self, x: &Matrix<T>) -> Result<Matrix<T>, PreprocessError> {
        if x.cols() != self.fitted_dim {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.fitted_dim,
                found: x.cols(),
            });
        }
        let mut out = x.clone();
        out.as_mut_slice()
            .par_chunks_mut(self.fitted_dim.max(1))
            .for_each(|row| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.apply(j, *v);
                }
            });
        Ok(out)
    }

    pub fn transform(&self, data: &Dataset<T>) -> Result<Dataset<T>, PreprocessError> {
        let x = self.transform_matrix(data.features())?;
        Ok(data.replace_features(x)?)
    }

    #[inline]
    fn apply(&self, j: usize, v: T) -> T {
        let v = (v - self.robust.median[j]) / divisor(self.robust.iqr[j]);
        let v = (v - self.standard.mean[j]) / divisor(self.standard.stddev[j]);
        (v - self.minmax.min[j]) / divisor(self.minmax.max[j] - self.minmax.min[j])
    }

    /// The composite per-feature map as `(scale, offset)` with `y = scale * x + offset`.
    pub fn affine(&self) -> Vec<(T, T)> {
        (0..self.fitted_dim)
            .map(|j| {
                let a = divisor(self.robust.iqr[j]);
                let b = divisor(self.standard.stddev[j]);
                let c = divisor(self.minmax.max[j] - self.minmax.min[j]);
                let scale = T::one() / (a * b * c);
                let offset = ((-self.robust.median[j] / a - self.standard.mean[j]) / b - self.minmax.min[j]) / c;
                (scale, offset)
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PreprocessError> {
        Ok(blob::save(path, PIPELINE_MAGIC, self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let p: Self = blob::load(path, PIPELINE_MAGIC)?;
        Ok(p)
    }
}

pub fn fit_pipeline<T: Scalar>(train: &Dataset<T>) -> Result<PreprocessPipeline<T>, PreprocessError> {
    PreprocessPipeline::fit(train)
}

pub fn transform<T: Scalar>(p: &PreprocessPipeline<T>, data: &Dataset<T>) -> Result<Dataset<T>, PreprocessError> {
    p.transform(data)
}
