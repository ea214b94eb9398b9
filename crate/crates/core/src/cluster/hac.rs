//! Agglomerative clustering with the nearest-neighbour-chain algorithm and
//! Lance-Williams updates, plus the subset-and-extend workaround for large
//! training sets.
//!
//! Ward works on squared Euclidean distances internally and reports
//! `sqrt` heights; average, complete and single linkage use plain Euclidean
//! distances. All four are reducible, so sorting the chain's merges by height
//! reproduces the greedy closest-pair merge order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, nearest, Assignment, ClusterError};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Average,
    Complete,
    Single,
}

impl std::str::FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ward" => Ok(Linkage::Ward),
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "single" => Ok(Linkage::Single),
            _ => Err(format!("unknown linkage {s:?}")),
        }
    }
}

/// One merge step. `a` and `b` are representative observation indices of
/// the two merged clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Merges in non-decreasing height order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + j - i - 1
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Dendrogram {
    /// Flat labels after applying the first `n − n_clusters` merges, numbered
    /// by first appearance.
    pub fn cut(&self, n_clusters: usize) -> Vec<usize> {
        let steps = self.n.saturating_sub(n_clusters.max(1)).min(self.merges.len());
        let mut parent: Vec<usize> = (0..self.n).collect();
        for m in &self.merges[..steps] {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        (0..self.n)
            .map(|i| {
                let r = find(&mut parent, i);
                if label[r] == usize::MAX {
                    label[r] = next;
                    next += 1;
                }
                label[r]
            })
            .collect()
    }

    fn from_condensed(mut dist: Condensed, sizes: Vec<f64>, linkage: Linkage) -> Self {
        let n = dist.n;
        let mut size = sizes;
        let mut active = vec![true; n];
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        let mut chain: Vec<usize> = Vec::with_capacity(n);
        while merges.len() + 1 < n {
            if chain.is_empty() {
                chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
            }
            let (a, b) = loop {
                let a = *chain.last().expect("non-empty chain");
                let prev = chain.len().checked_sub(2).map(|i| chain[i]);
                // seed with the predecessor so equal distances never create a cycle
                let mut best = prev.map(|p| (dist.get(a, p), p));
                for j in (0..n).filter(|&j| active[j] && j != a) {
                    let dj = dist.get(a, j);
                    if best.is_none_or(|(bd, _)| dj < bd) {
                        best = Some((dj, j));
                    }
                }
                let b = best.expect("another active cluster").1;
                if Some(b) == prev {
                    break (a, b);
                }
                chain.push(b);
            };
            chain.truncate(chain.len() - 2);
            let (keep, gone) = if a < b { (a, b) } else { (b, a) };
            let dab = dist.get(a, b);
            let (na, nb) = (size[keep], size[gone]);
            for k in (0..n).filter(|&k| active[k] && k != keep && k != gone) {
                let (dka, dkb) = (dist.get(k, keep), dist.get(k, gone));
                let v = match linkage {
                    Linkage::Ward => {
                        let nk = size[k];
                        ((nk + na) * dka + (nk + nb) * dkb - nk * dab) / (na + nb + nk)
                    }
                    Linkage::Average => (na * dka + nb * dkb) / (na + nb),
                    Linkage::Complete => dka.max(dkb),
                    Linkage::Single => dka.min(dkb),
                };
                dist.set(k, keep, v);
            }
            active[gone] = false;
            size[keep] = na + nb;
            let height = if linkage == Linkage::Ward { dab.max(0.0).sqrt() } else { dab };
            merges.push(Merge { a: keep, b: gone, height });
        }
        merges.sort_by(|x, y| x.height.total_cmp(&y.height));
        Dendrogram { n, merges }
    }
}

/// Full agglomerative hierarchy of the rows of `data`.
pub fn linkage<T: Scalar>(data: &Matrix<T>, linkage: Linkage) -> Dendrogram {
    let n = data.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let s = sq_dist(data.row(i), data.row(j)).as_f64();
            d.push(if linkage == Linkage::Ward { s } else { s.sqrt() });
        }
    }
    Dendrogram::from_condensed(Condensed { n, d }, vec![1.0; n], linkage)
}

/// Ward hierarchy over weighted centroids (BIRCH leaf subclusters). The
/// initial dissimilarity `2·wᵢwⱼ/(wᵢ+wⱼ)·‖μᵢ−μⱼ‖²` reduces to the squared
/// distance for unit weights.
pub(crate) fn weighted_ward(centroids: &[Vec<f64>], weights: &[f64]) -> Dendrogram {
    let n = centroids.len();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let s = sq_dist(&centroids[i], &centroids[j]);
            d.push(2.0 * weights[i] * weights[j] / (weights[i] + weights[j]) * s);
        }
    }
    Dendrogram::from_condensed(Condensed { n, d }, weights.to_vec(), Linkage::Ward)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HacModel<T> {
    /// Training rows that were agglomerated, ascending.
    pub subset_ids: Vec<usize>,
    pub subset_assignment: Assignment,
    pub linkage: Linkage,
    /// Mean of each cluster's subset members; the extension classifier.
    pub cluster_centroids: Matrix<T>,
    pub n_clusters: usize,
}

impl<T: Scalar> HacModel<T> {
    /// Nearest cluster centroid; ties go to the lower id.
    pub fn predict(&self, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
        check_width(self.cluster_centroids.cols(), data)?;
        Ok(Assignment::from_ids(
            data.iter_rows().map(|r| nearest(r, &self.cluster_centroids).0),
        ))
    }
}

/// Agglomerates a seeded uniform subset of `subset_size` rows down to
/// `n_clusters` and labels every remaining row by nearest cluster centroid.
/// Subset members keep their agglomerative labels.
pub fn fit_hac<T: Scalar>(
    data: &Matrix<T>,
    n_clusters: usize,
    subset_size: usize,
    linkage_kind: Linkage,
    seed: u64,
) -> Result<(HacModel<T>, Assignment), ClusterError> {
    let n = data.rows();
    if n_clusters == 0 || n_clusters > subset_size || subset_size > n {
        return Err(ClusterError::SubsetTooSmall {
            subset: subset_size,
            k: n_clusters,
            n,
        });
    }
    let subset_ids: Vec<usize> = if subset_size == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids = rand::seq::index::sample(&mut rng, n, subset_size).into_vec();
        ids.sort_unstable();
        ids
    };
    let subset = data.select_rows(&subset_ids);
    let sub_labels = linkage(&subset, linkage_kind).cut(n_clusters);

    let dim = data.cols();
    let mut centroids = Matrix::zeros(n_clusters, dim);
    let mut counts = vec![0usize; n_clusters];
    for (row, &c) in subset.iter_rows().zip(&sub_labels) {
        counts[c] += 1;
        for (s, &v) in centroids.row_mut(c).iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        let cnt = T::of_usize(cnt);
        centroids.row_mut(c).iter_mut().for_each(|v| *v /= cnt);
    }

    let mut labels = vec![0usize; n];
    let mut in_subset = vec![false; n];
    for (&i, &c) in subset_ids.iter().zip(&sub_labels) {
        labels[i] = c;
        in_subset[i] = true;
    }
    for i in (0..n).filter(|&i| !in_subset[i]) {
        labels[i] = nearest(data.row(i), &centroids).0;
    }
    let model = HacModel {
        subset_ids,
        subset_assignment: Assignment::from_ids(sub_labels),
        linkage: linkage_kind,
        cluster_centroids: centroids,
        n_clusters,
    };
    Ok((model, Assignment::from_ids(labels)))
}

pub fn predict_hac<T: Scalar>(m: &HacModel<T>, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
    m.predict(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_keeps_every_point_apart() {
        let x = Matrix::from_vec(50, 2, (0..100).map(|v| (v * v % 17) as f64 + v as f64 * 0.01).collect());
        let (m, a) = fit_hac(&x, 50, 50, Linkage::Ward, 0).unwrap();
        assert_eq!(a.n_clusters(), 50);
        assert_eq!(m.subset_assignment.n_clusters(), 50);
    }

    #[test]
    fn single_linkage_chain() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let d = linkage(&x, Linkage::Single);
        let h: Vec<f64> = d.merges.iter().map(|m| m.height).collect();
        assert_eq!(h, vec![1.0, 2.0, 4.0]);
        assert_eq!(d.cut(2), vec![0, 0, 0, 1]);
        assert_eq!(d.cut(1), vec![0; 4]);
        assert_eq!(d.cut(4), vec![0, 1, 2, 3]);
    }

    #[test]
    fn ward_heights_match_definition() {
        // merging {0} and {1}: sqrt(2·1·1/2)·1 = 1; then {0,1} with {4}:
        // sqrt(2·2·1/3)·3.5
        let x = Matrix::from_rows(&[[0.0], [1.0], [4.0]]).unwrap();
        let d = linkage(&x, Linkage::Ward);
        assert!((d.merges[0].height - 1.0).abs() < 1e-12);
        assert!((d.merges[1].height - (4.0f64 / 3.0).sqrt() * 3.5).abs() < 1e-12);
    }

    #[test]
    fn centroids_are_exact_member_means() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 12.0], [11.0, 11.0]]).unwrap();
        let (m, a) = fit_hac(&x, 2, 5, Linkage::Average, 0).unwrap();
        assert_eq!(a.labels(), &[Some(0), Some(0), Some(1), Some(1), Some(1)]);
        assert_eq!(m.cluster_centroids.row(0), &[0.0, 0.5]);
        assert_eq!(m.cluster_centroids.row(1), &[31.0 / 3.0, 11.0]);
    }

    #[test]
    fn predict_tie_goes_low() {
        let m = HacModel {
            subset_ids: vec![],
            subset_assignment: Assignment::new(vec![]),
            linkage: Linkage::Ward,
            cluster_centroids: Matrix::from_rows(&[[3.0], [-1.0], [1.0]]).unwrap(),
            n_clusters: 3,
        };
        let p = m.predict(&Matrix::from_rows(&[[0.0], [3.0]]).unwrap()).unwrap();
        assert_eq!(p.labels(), &[Some(1), Some(0)]);
    }

    #[test]
    fn subset_bounds() {
        let x = Matrix::<f64>::zeros(10, 2);
        assert!(matches!(fit_hac(&x, 5, 4, Linkage::Ward, 0), Err(ClusterError::SubsetTooSmall { .. })));
        assert!(matches!(fit_hac(&x, 2, 11, Linkage::Ward, 0), Err(ClusterError::SubsetTooSmall { .. })));
    }

    #[test]
    fn subset_is_seeded() {
        let x = Matrix::from_vec(40, 1, (0..40).map(|v| v as f64).collect());
        let (a, _) = fit_hac(&x, 3, 10, Linkage::Complete, 5).unwrap();
        let (b, _) = fit_hac(&x, 3, 10, Linkage::Complete, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subset_ids.len(), 10);
        assert!(a.subset_ids.windows(2).all(|w| w[0] < w[1]));
    }
}
