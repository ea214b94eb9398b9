use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Per-sample cluster ids; `None` is DBSCAN noise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    labels: Vec<Option<usize>>,
}

impl Assignment {
    pub fn new(labels: Vec<Option<usize>>) -> Self {
        Self { labels }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        Self {
            labels: ids.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Distinct non-noise ids.
    pub fn n_clusters(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.iter().flatten().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Relabels clusters `0..n_found` in order of first appearance.
    pub fn canonicalize(&self) -> Self {
        let mut map = HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                l.map(|c| {
                    let next = map.len();
                    *map.entry(c).or_insert(next)
                })
            })
            .collect();
        Self { labels }
    }

    /// Same grouping and same noise set, ignoring id values.
    pub fn same_partition(&self, other: &Self) -> bool {
        self.len() == other.len() && self.canonicalize() == other.canonicalize()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ids_are_contiguous() {
        let a = Assignment::new(vec![Some(7), None, Some(3), Some(7), Some(9)]);
        let c = a.canonicalize();
        assert_eq!(c.labels(), &[Some(0), None, Some(1), Some(0), Some(2)]);
        assert_eq!(c.n_clusters(), 3);
        assert_eq!(c.noise_count(), 1);
        assert!(a.same_partition(&c));
        assert!(!a.same_partition(&Assignment::new(vec![Some(7), Some(1), Some(3), Some(7), Some(9)])));
    }
}
