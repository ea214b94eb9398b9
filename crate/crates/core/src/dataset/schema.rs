use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::scalar::Scalar;

/// Width of the Ember static feature vector.
pub const EMBER_FEATURES: usize = 2381;

const EMBER_CATEGORIES: [(&str, usize, usize); 9] = [
    ("byte_histogram", 0, 255),
    ("byte_entropy_histogram", 256, 511),
    ("string_extractor", 512, 615),
    ("general_file_info", 616, 625),
    ("header_file_info", 626, 687),
    ("section_information", 688, 942),
    ("imports_information", 943, 2222),
    ("exports_information", 2223, 2350),
    ("data_directories_information", 2351, 2380),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCategory {
    pub name: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

/// Column layout of a feature file plus the columns to drop before modeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    total_columns: usize,
    categories: Vec<FeatureCategory>,
    eliminated: BTreeSet<usize>,
}

impl FeatureSchema {
    /// The 2381-column Ember layout with its nine feature categories.
    pub fn ember() -> Self {
        Self {
            total_columns: EMBER_FEATURES,
            categories: EMBER_CATEGORIES
                .iter()
                .map(|&(name, start, end)| FeatureCategory {
                    name: name.to_string(),
                    start,
                    end,
                })
                .collect(),
            eliminated: BTreeSet::new(),
        }
    }

    /// A layout of `d` uncategorised columns.
    pub fn plain(d: usize) -> Self {
        Self {
            total_columns: d,
            categories: vec![FeatureCategory {
                name: "features".to_string(),
                start: 0,
                end: d.saturating_sub(1),
            }],
            eliminated: BTreeSet::new(),
        }
    }

    pub fn with_eliminated(mut self, indices: impl IntoIterator<Item = usize>) -> Result<Self, DatasetError> {
        for j in indices {
            if j >= self.total_columns {
                return Err(DatasetError::IndexOutOfRange {
                    index: j,
                    width: self.total_columns,
                });
            }
            self.eliminated.insert(j);
        }
        Ok(self)
    }

    pub fn total_columns(&self) -> usize {
        self.total_columns
    }

    pub fn categories(&self) -> &[FeatureCategory] {
        &self.categories
    }

    pub fn eliminated(&self) -> &BTreeSet<usize> {
        &self.eliminated
    }

    pub fn retained_count(&self) -> usize {
        self.total_columns - self.eliminated.len()
    }

    /// Category name owning column `j`.
    pub fn category_of(&self, j: usize) -> Option<&str> {
        self.categories
            .iter()
            .find(|c| c.start <= j && j <= c.end)
            .map(|c| c.name.as_str())
    }

    /// Checks that the categories tile `[0, total_columns)` in order.
    pub fn categories_cover(&self) -> bool {
        let mut next = 0;
        for c in &self.categories {
            if c.start != next || c.end < c.start {
                return false;
            }
            next = c.end + 1;
        }
        next == self.total_columns
    }
}

/// Indices of columns holding a single value across all rows. This is the
/// default elimination list when none is supplied; fit it on the training split.
pub fn constant_columns<T: Scalar>(ds: &Dataset<T>) -> Vec<usize> {
    let x = ds.features();
    let first = x.row(0);
    (0..ds.d())
        .filter(|&j| x.iter_rows().all(|r| r[j] == first[j]))
        .collect()
}

/// One index per line; blank lines and `#` comments are skipped.
pub fn load_elimination_list(path: impl AsRef<Path>) -> Result<Vec<usize>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let idx = line.parse::<usize>().map_err(|e| DatasetError::MalformedRow {
            line: i + 1,
            id: None,
            reason: format!("elimination index {line:?}: {e}"),
        })?;
        out.push(idx);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn write_elimination_list(path: impl AsRef<Path>, indices: &[usize]) -> Result<(), DatasetError> {
    let mut text = String::new();
    for j in indices {
        text.push_str(&j.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}
