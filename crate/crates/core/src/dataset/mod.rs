//! Labeled feature-vector datasets in the Ember column layout.
//!
//! A [`Dataset`] is an `n × d` feature matrix together with one ground-truth
//! [`Label`] and one opaque id per row. Labels are either a malware family or
//! the single distinguished benign class.

mod io;
mod schema;
mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use io::{load_dataset, read_binary, write_binary, write_text, LabelColumns, BINARY_MAGIC};
pub use schema::{
    constant_columns, load_elimination_list, write_elimination_list, FeatureCategory, FeatureSchema,
    EMBER_FEATURES,
};
pub use synth::{generate_synthetic, generate_synthetic_with_centers, SyntheticSpec, SyntheticTruth};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed row at line {line}{}: {reason}", id.as_ref().map(|i| format!(" (id {i})")).unwrap_or_default())]
    MalformedRow {
        line: usize,
        id: Option<String>,
        reason: String,
    },
    #[error("schema mismatch: expected {expected} feature columns, found {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("split of {n} samples with fraction {fraction} leaves one side empty")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("dataset is already tagged {0:?}; only unsplit data can be split")]
    AlreadySplit(SplitTag),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("delimited-text error: {0}")]
    Csv(#[from] csv::Error),
}

/// Ground-truth class of a sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Family(String),
    Benign,
}

impl Label {
    pub fn family(name: impl Into<String>) -> Self {
        Label::Family(name.into())
    }

    pub fn is_benign(&self) -> bool {
        matches!(self, Label::Benign)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Benign => f.write_str("benign"),
            Label::Family(name) => write!(f, "family:{name}"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "benign" {
            return Ok(Label::Benign);
        }
        match s.strip_prefix("family:") {
            Some(name) if !name.is_empty() => Ok(Label::Family(name.to_string())),
            _ => Err(format!("label {s:?} is neither `benign` nor `family:<name>`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Test,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<Label>,
    ids: Vec<String>,
    split: SplitTag,
}

impl<T: Scalar> Dataset<T> {
    /// Validates shape agreement and finiteness.
    pub fn new(features: Matrix<T>, labels: Vec<Label>, ids: Vec<String>) -> Result<Self, DatasetError> {
        if features.rows() == 0 {
            return Err(DatasetError::EmptyDataset);
        }
        if labels.len() != features.rows() || ids.len() != features.rows() {
            return Err(DatasetError::Inconsistent(format!(
                "{} rows, {} labels, {} ids",
                features.rows(),
                labels.len(),
                ids.len()
            )));
        }
        for (i, row) in features.iter_rows().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::MalformedRow {
                    line: i + 1,
                    id: Some(ids[i].clone()),
                    reason: format!("non-finite value in feature column {j}"),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            ids,
            split: SplitTag::Unsplit,
        })
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    /// Number of distinct malware families (`m`).
    pub fn n_families(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| !l.is_benign())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    /// Same rows and labels, new feature matrix (e.g. after a transform).
    pub fn replace_features<U: Scalar>(&self, features: Matrix<U>) -> Result<Dataset<U>, DatasetError> {
        if features.rows() != self.n() {
            return Err(DatasetError::Inconsistent(format!(
                "replacement has {} rows, dataset has {}",
                features.rows(),
                self.n()
            )));
        }
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            ids: self.ids.clone(),
            split: self.split,
        })
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            split: self.split,
        }
    }
}

/// Drops `schema.eliminated` columns, preserving the order of the rest.
pub fn eliminate_features<T: Scalar>(ds: &Dataset<T>, schema: &FeatureSchema) -> Result<Dataset<T>, DatasetError> {
    if let Some(&bad) = schema.eliminated().iter().find(|&&j| j >= ds.d()) {
        return Err(DatasetError::IndexOutOfRange {
            index: bad,
            width: ds.d(),
        });
    }
    if schema.eliminated().is_empty() {
        return Ok(ds.clone());
    }
    let keep: Vec<usize> = (0..ds.d()).filter(|j| !schema.eliminated().contains(j)).collect();
    ds.replace_features(ds.features.select_columns(&keep))
}

/// Uniform (unstratified) seeded split. Each side keeps the original row order.
pub fn train_test_split<T: Scalar>(
    ds: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>), DatasetError> {
    if ds.split != SplitTag::Unsplit {
        return Err(DatasetError::AlreadySplit(ds.split));
    }
    let n = ds.n();
    let degenerate = DatasetError::DegenerateSplit {
        n,
        fraction: train_fraction,
    };
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(degenerate);
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(degenerate);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        ds.select(train_idx).with_split(SplitTag::Train),
        ds.select(test_idx).with_split(SplitTag::Test),
    ))
}
