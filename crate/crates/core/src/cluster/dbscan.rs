//! Density-based clustering with kd-tree region queries.
//!
//! A point is core when at least `min_pts` points (itself included) lie
//! within `epsilon`. Clusters are connected components of core points under
//! ε-adjacency, numbered by their lowest core index. A non-core point joins
//! the cluster of its lowest-index core neighbor; the rest are noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, Assignment, ClusterError, KdTree};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DbscanModel<T> {
    pub epsilon: T,
    pub min_pts: usize,
    pub core_points: Matrix<T>,
    /// Cluster of each row of `core_points`.
    pub core_labels: Vec<usize>,
    /// Training row of each core point.
    pub core_rows: Vec<usize>,
    pub train_assignment: Assignment,
    /// Index over `core_points`.
    pub index: KdTree<T>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller root so every root is its component's minimum.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn fit_dbscan<T: Scalar>(
    data: &Matrix<T>,
    epsilon: f64,
    min_pts: usize,
) -> Result<(DbscanModel<T>, Assignment), ClusterError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ClusterError::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
    }
    if min_pts == 0 {
        return Err(ClusterError::InvalidParameter("min_pts must be >= 1".into()));
    }
    let eps = T::of(epsilon);
    let n = data.rows();
    let tree = KdTree::build(data);
    let is_core: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| tree.count_within(data.row(i), eps) >= min_pts)
        .collect();

    // Per point: core neighbors with a larger index (for unions) and, for
    // non-core points, the smallest core neighbor.
    let links: Vec<(Vec<usize>, Option<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut up = Vec::new();
            let mut first_core = None::<usize>;
            tree.for_each_within(data.row(i), eps, |j, _| {
                if is_core[j] {
                    if is_core[i] && j > i {
                        up.push(j);
                    }
                    if first_core.is_none_or(|c| j < c) {
                        first_core = Some(j);
                    }
                }
            });
            (up, first_core)
        })
        .collect();

    let mut uf = UnionFind::new(n);
    for (i, (up, _)) in links.iter().enumerate() {
        for &j in up {
            uf.union(i, j);
        }
    }
    let mut root_label = vec![usize::MAX; n];
    let mut labels = vec![None; n];
    let mut next = 0;
    for i in (0..n).filter(|&i| is_core[i]) {
        let r = uf.find(i);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        labels[i] = Some(root_label[r]);
    }
    for i in (0..n).filter(|&i| !is_core[i]) {
        labels[i] = links[i].1.map(|c| labels[c].expect("core points are labeled"));
    }

    let core_rows: Vec<usize> = (0..n).filter(|&i| is_core[i]).collect();
    let core_points = data.select_rows(&core_rows);
    let core_labels = core_rows.iter().map(|&i| labels[i].expect("core")).collect();
    let assignment = Assignment::new(labels);
    Ok((
        DbscanModel {
            epsilon: eps,
            min_pts,
            index: KdTree::build(&core_points),
            core_points,
            core_labels,
            core_rows,
            train_assignment: assignment.clone(),
        },
        assignment,
    ))
}

impl<T: Scalar> DbscanModel<T> {
    pub fn n_clusters(&self) -> usize {
        self.core_labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// Nearest core point within epsilon decides the cluster; ties on
    /// distance go to the lower cluster id. Otherwise noise.
    pub fn predict(&self, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
        if !self.index.is_empty() {
            check_width(self.core_points.cols(), data)?;
        }
        let labels = (0..data.rows())
            .into_par_iter()
            .map(|i| {
                let mut best: Option<(T, usize)> = None;
                self.index.for_each_within(data.row(i), self.epsilon, |j, d| {
                    let cand = (d, self.core_labels[j]);
                    best = match best {
                        Some(b) if (b.0, b.1) <= cand => Some(b),
                        _ => Some(cand),
                    };
                });
                best.map(|(_, c)| c)
            })
            .collect();
        Ok(Assignment::new(labels))
    }
}

pub fn predict_dbscan<T: Scalar>(m: &DbscanModel<T>, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
    m.predict(data)
}
