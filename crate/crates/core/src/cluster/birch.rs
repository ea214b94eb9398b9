//! BIRCH: single-pass CF-tree construction followed by a global Ward
//! agglomeration of the leaf subclusters.
//!
//! Clustering features are kept in `f64` regardless of the data scalar. After
//! every insertion the entries along the descent path are recomputed as the
//! ordered sum of their child's entries, so the additivity invariant holds
//! exactly rather than up to accumulated drift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hac::weighted_ward;
use super::{check_width, nearest, Assignment, ClusterError};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

/// Sufficient statistics `(N, LS, SS)` of a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringFeature {
    pub n: usize,
    pub ls: Vec<f64>,
    pub ss: f64,
}

impl ClusteringFeature {
    pub fn empty(dim: usize) -> Self {
        ClusteringFeature { n: 0, ls: vec![0.0; dim], ss: 0.0 }
    }

    pub fn from_point<T: Scalar>(x: &[T]) -> Self {
        let ls: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let ss = ls.iter().map(|v| v * v).sum();
        ClusteringFeature { n: 1, ls, ss }
    }

    pub fn merged(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add(other);
        out
    }

    pub fn add(&mut self, other: &Self) {
        self.n += other.n;
        for (a, b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
        self.ss += other.ss;
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.ls.iter().map(|v| v / n).collect()
    }

    /// `sqrt(SS/N − ‖LS/N‖²)`, clamped at zero against cancellation.
    pub fn radius(&self) -> f64 {
        let n = self.n as f64;
        let c2: f64 = self.ls.iter().map(|v| (v / n) * (v / n)).sum();
        (self.ss / n - c2).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirchNode {
    pub is_leaf: bool,
    pub entries: Vec<ClusteringFeature>,
    /// Child node per entry; empty for leaves.
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BirchModel<T> {
    pub nodes: Vec<BirchNode>,
    pub root: usize,
    pub threshold: f64,
    pub branching_factor: usize,
    /// Leaf entries in depth-first order.
    pub leaf_subclusters: Vec<ClusteringFeature>,
    pub leaf_centroids: Matrix<T>,
    /// Global cluster of each leaf subcluster.
    pub global_labels: Vec<usize>,
    pub n_clusters: usize,
    pub requested_clusters: usize,
    /// Fewer leaf subclusters than requested clusters; `n_clusters` holds
    /// the achievable count.
    pub shortfall: bool,
}

fn nearest_entry(entries: &[ClusteringFeature], x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, e) in entries.iter().enumerate() {
        let d = sq_dist(&e.centroid(), x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

struct Tree {
    nodes: Vec<BirchNode>,
    root: usize,
    threshold: f64,
    branching: usize,
    dim: usize,
}

impl Tree {
    fn node_cf(&self, id: usize) -> ClusteringFeature {
        let mut cf = ClusteringFeature::empty(self.dim);
        for e in &self.nodes[id].entries {
            cf.add(e);
        }
        cf
    }

    fn insert(&mut self, x: &ClusteringFeature) {
        let centroid = x.ls.clone();
        if let Some(sibling) = self.insert_at(self.root, x, &centroid) {
            let old = self.root;
            let entries = vec![self.node_cf(old), self.node_cf(sibling)];
            self.nodes.push(BirchNode { is_leaf: false, entries, children: vec![old, sibling] });
            self.root = self.nodes.len() - 1;
        }
    }

    /// Returns the id of a new sibling if `id` had to split.
    fn insert_at(&mut self, id: usize, x: &ClusteringFeature, point: &[f64]) -> Option<usize> {
        if self.nodes[id].is_leaf {
            let node = &mut self.nodes[id];
            if !node.entries.is_empty() {
                let i = nearest_entry(&node.entries, point);
                let cand = node.entries[i].merged(x);
                if cand.radius() <= self.threshold {
                    node.entries[i] = cand;
                    return None;
                }
            }
            node.entries.push(x.clone());
        } else {
            let i = nearest_entry(&self.nodes[id].entries, point);
            let child = self.nodes[id].children[i];
            let split = self.insert_at(child, x, point);
            self.nodes[id].entries[i] = self.node_cf(child);
            if let Some(s) = split {
                let cf = self.node_cf(s);
                let node = &mut self.nodes[id];
                node.entries.insert(i + 1, cf);
                node.children.insert(i + 1, s);
            }
        }
        (self.nodes[id].entries.len() > self.branching).then(|| self.split(id))
    }

    /// Farthest pair of entry centroids seeds the two halves; every other
    /// entry goes to the closer seed (ties to the first).
    fn split(&mut self, id: usize) -> usize {
        let node = std::mem::replace(
            &mut self.nodes[id],
            BirchNode { is_leaf: false, entries: vec![], children: vec![] },
        );
        let cents: Vec<Vec<f64>> = node.entries.iter().map(|e| e.centroid()).collect();
        let m = cents.len();
        let (mut s1, mut s2, mut far) = (0, 1, -1.0);
        for i in 0..m {
            for j in i + 1..m {
                let d = sq_dist(&cents[i], &cents[j]);
                if d > far {
                    (s1, s2, far) = (i, j, d);
                }
            }
        }
        let mut left = BirchNode { is_leaf: node.is_leaf, entries: vec![], children: vec![] };
        let mut right = left.clone();
        for (i, e) in node.entries.into_iter().enumerate() {
            let to_left = i == s1
                || (i != s2 && sq_dist(&cents[i], &cents[s1]) <= sq_dist(&cents[i], &cents[s2]));
            let side = if to_left { &mut left } else { &mut right };
            side.entries.push(e);
            if !node.is_leaf {
                side.children.push(node.children[i]);
            }
        }
        self.nodes[id] = left;
        self.nodes.push(right);
        self.nodes.len() - 1
    }

    fn leaves(&self) -> Vec<ClusteringFeature> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.is_leaf {
                out.extend(node.entries.iter().cloned());
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }
}

impl<T: Scalar> BirchModel<T> {
    /// Nearest leaf-subcluster centroid, mapped to its global cluster.
    pub fn predict(&self, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
        check_width(self.leaf_centroids.cols(), data)?;
        Ok(Assignment::from_ids(
            data.iter_rows().map(|r| self.global_labels[nearest(r, &self.leaf_centroids).0]),
        ))
    }

    /// Checks CF additivity on every internal entry and the radius bound on
    /// every leaf entry.
    pub fn check_invariants(&self) -> Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        for (id, node) in self.nodes.iter().enumerate() {
            if node.is_leaf {
                for (i, e) in node.entries.iter().enumerate() {
                    let r = e.radius();
                    if r > self.threshold + 1e-9 {
                        return Err(format!("leaf {id} entry {i}: radius {r} > threshold {}", self.threshold));
                    }
                }
                continue;
            }
            if node.entries.len() != node.children.len() {
                return Err(format!("node {id}: {} entries vs {} children", node.entries.len(), node.children.len()));
            }
            for (i, (e, &c)) in node.entries.iter().zip(&node.children).enumerate() {
                let mut sum = ClusteringFeature::empty(e.ls.len());
                for ce in &self.nodes[c].entries {
                    sum.add(ce);
                }
                if sum.n != e.n
                    || !close(sum.ss, e.ss)
                    || !sum.ls.iter().zip(&e.ls).all(|(&a, &b)| close(a, b))
                {
                    return Err(format!("node {id} entry {i} differs from the sum of node {c}"));
                }
            }
        }
        Ok(())
    }
}

/// Half the mean pairwise distance of a seeded sample of up to 1000 rows.
pub fn default_threshold<T: Scalar>(data: &Matrix<T>, seed: u64) -> f64 {
    let n = data.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = rand::seq::index::sample(&mut rng, n, n.min(1000)).into_vec();
    let (mut total, mut pairs) = (0.0, 0usize);
    for (a, &i) in ids.iter().enumerate() {
        for &j in &ids[a + 1..] {
            total += sq_dist(data.row(i), data.row(j)).as_f64().sqrt();
            pairs += 1;
        }
    }
    let t = if pairs == 0 { 0.0 } else { 0.5 * total / pairs as f64 };
    if t > 0.0 {
        t
    } else {
        1.0
    }
}

pub fn fit_birch<T: Scalar>(
    data: &Matrix<T>,
    threshold: f64,
    branching_factor: usize,
    n_clusters: usize,
) -> Result<(BirchModel<T>, Assignment), ClusterError> {
    if !(threshold > 0.0) {
        return Err(ClusterError::InvalidParameter(format!("threshold must be positive, got {threshold}")));
    }
    if branching_factor < 2 {
        return Err(ClusterError::InvalidParameter(format!(
            "branching factor must be at least 2, got {branching_factor}"
        )));
    }
    if n_clusters == 0 {
        return Err(ClusterError::InvalidParameter("n_clusters must be at least 1".into()));
    }
    if data.rows() == 0 {
        return Err(ClusterError::TooFewSamples { n: 0, k: n_clusters });
    }
    let dim = data.cols();
    let mut tree = Tree {
        nodes: vec![BirchNode { is_leaf: true, entries: vec![], children: vec![] }],
        root: 0,
        threshold,
        branching: branching_factor,
        dim,
    };
    for row in data.iter_rows() {
        tree.insert(&ClusteringFeature::from_point(row));
    }

    let leaves = tree.leaves();
    let cents: Vec<Vec<f64>> = leaves.iter().map(|e| e.centroid()).collect();
    let shortfall = leaves.len() < n_clusters;
    let achieved = n_clusters.min(leaves.len());
    let global_labels = if shortfall {
        (0..leaves.len()).collect()
    } else {
        let weights: Vec<f64> = leaves.iter().map(|e| e.n as f64).collect();
        weighted_ward(&cents, &weights).cut(achieved)
    };
    let leaf_centroids = Matrix::from_vec(
        leaves.len(),
        dim,
        cents.iter().flatten().map(|&v| T::of(v)).collect(),
    );
    let model = BirchModel {
        nodes: tree.nodes,
        root: tree.root,
        threshold,
        branching_factor,
        leaf_subclusters: leaves,
        leaf_centroids,
        global_labels,
        n_clusters: achieved,
        requested_clusters: n_clusters,
        shortfall,
    };
    let labels = model.predict(data)?;
    Ok((model, labels))
}

pub fn predict_birch<T: Scalar>(m: &BirchModel<T>, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
    m.predict(data)
}
