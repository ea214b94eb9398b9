//! External clustering evaluation: homogeneity, completeness and V-measure
//! over the class × cluster contingency table. Entropies use natural logs
//! and `0·log 0 = 0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Assignment;
use crate::dataset::Label;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{truth} true labels but {assigned} assignments")]
    LengthMismatch { truth: usize, assigned: usize },
    #[error("no samples left after dropping noise")]
    EmptyAfterDrop,
}

/// How DBSCAN noise enters the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoisePolicy {
    /// Every noise point is its own one-member cluster.
    #[default]
    NoiseAsSingletons,
    NoiseAsOneCluster,
    DropNoise,
}

/// Cluster column key. Singleton noise columns sort after real clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClusterKey {
    Cluster(usize),
    Noise,
    NoisePoint(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable<L = Label> {
    /// `counts[class][cluster]`.
    pub counts: Vec<Vec<u64>>,
    pub class_labels: Vec<L>,
    pub cluster_ids: Vec<ClusterKey>,
    pub n: u64,
    pub noise_policy: NoisePolicy,
    /// Share of the original samples assigned to noise.
    pub noise_fraction: f64,
}

pub fn contingency<L: Ord + Clone>(
    truth: &[L],
    assignment: &Assignment,
    policy: NoisePolicy,
) -> Result<ContingencyTable<L>, MetricsError> {
    if truth.len() != assignment.len() || truth.is_empty() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            assigned: assignment.len(),
        });
    }
    let noise = assignment.noise_count();
    let mut cells: BTreeMap<(&L, ClusterKey), u64> = BTreeMap::new();
    for (i, (t, a)) in truth.iter().zip(assignment.labels()).enumerate() {
        let key = match (a, policy) {
            (Some(c), _) => ClusterKey::Cluster(*c),
            (None, NoisePolicy::NoiseAsSingletons) => ClusterKey::NoisePoint(i),
            (None, NoisePolicy::NoiseAsOneCluster) => ClusterKey::Noise,
            (None, NoisePolicy::DropNoise) => continue,
        };
        *cells.entry((t, key)).or_default() += 1;
    }
    if cells.is_empty() {
        return Err(MetricsError::EmptyAfterDrop);
    }
    let mut classes: Vec<&L> = cells.keys().map(|(l, _)| *l).collect();
    classes.dedup();
    let mut clusters: Vec<ClusterKey> = cells.keys().map(|(_, k)| *k).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let col: BTreeMap<ClusterKey, usize> = clusters.iter().enumerate().map(|(j, &k)| (k, j)).collect();
    let mut counts = vec![vec![0u64; clusters.len()]; classes.len()];
    let mut row = 0;
    for ((l, k), v) in &cells {
        while classes[row] != *l {
            row += 1;
        }
        counts[row][col[k]] = *v;
    }
    Ok(ContingencyTable {
        n: counts.iter().flatten().sum(),
        counts,
        class_labels: classes.into_iter().cloned().collect(),
        cluster_ids: clusters,
        noise_policy: policy,
        noise_fraction: noise as f64 / truth.len() as f64,
    })
}

impl<L: Clone> ContingencyTable<L> {
    /// Swaps the roles of classes and clusters (labels are dropped).
    pub fn transpose(&self) -> ContingencyTable<ClusterKey> {
        let (r, c) = (self.counts.len(), self.cluster_ids.len());
        ContingencyTable {
            counts: (0..c).map(|j| (0..r).map(|i| self.counts[i][j]).collect()).collect(),
            class_labels: self.cluster_ids.clone(),
            cluster_ids: (0..r).map(ClusterKey::Cluster).collect(),
            n: self.n,
            noise_policy: self.noise_policy,
            noise_fraction: self.noise_fraction,
        }
    }

    pub fn entropies(&self) -> Entropies {
        let n = self.n as f64;
        let plogp = |c: u64| {
            if c == 0 {
                0.0
            } else {
                let p = c as f64 / n;
                -p * p.ln()
            }
        };
        let row_sums: Vec<u64> = self.counts.iter().map(|r| r.iter().sum()).collect();
        let mut col_sums = vec![0u64; self.cluster_ids.len()];
        for r in &self.counts {
            for (s, v) in col_sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        let h_c: f64 = row_sums.iter().map(|&c| plogp(c)).sum();
        let h_k: f64 = col_sums.iter().map(|&c| plogp(c)).sum();
        let h_ck: f64 = self.counts.iter().flatten().map(|&c| plogp(c)).sum();
        // conditional entropies as their own sums rather than H(C,K) − H(·),
        // which keeps them non-negative without clamping
        let cond = |own: &[u64], idx: &dyn Fn(usize, usize) -> u64, a: usize, b: usize| -> f64 {
            let mut h = 0.0;
            for i in 0..a {
                for j in 0..b {
                    let c = idx(i, j);
                    if c > 0 {
                        h -= c as f64 / n * (c as f64 / own[j] as f64).ln();
                    }
                }
            }
            h
        };
        let (r, k) = (self.counts.len(), col_sums.len());
        let h_c_given_k = cond(&col_sums, &|i, j| self.counts[i][j], r, k);
        let h_k_given_c = cond(&row_sums, &|j, i| self.counts[i][j], k, r);
        Entropies {
            h_c,
            h_k,
            h_ck,
            h_c_given_k,
            h_k_given_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropies {
    pub h_c: f64,
    pub h_k: f64,
    pub h_ck: f64,
    pub h_c_given_k: f64,
    pub h_k_given_c: f64,
}

impl Entropies {
    pub fn homogeneity(&self) -> f64 {
        if self.h_ck == 0.0 || self.h_c == 0.0 {
            1.0
        } else {
            (1.0 - self.h_c_given_k / self.h_c).clamp(0.0, 1.0)
        }
    }

    pub fn completeness(&self) -> f64 {
        if self.h_ck == 0.0 || self.h_k == 0.0 {
            1.0
        } else {
            (1.0 - self.h_k_given_c / self.h_k).clamp(0.0, 1.0)
        }
    }
}

pub fn homogeneity<L: Clone>(t: &ContingencyTable<L>) -> f64 {
    t.entropies().homogeneity()
}

pub fn completeness<L: Clone>(t: &ContingencyTable<L>) -> f64 {
    t.entropies().completeness()
}

pub fn v_measure(h: f64, c: f64) -> f64 {
    if h + c == 0.0 {
        0.0
    } else {
        2.0 * h * c / (h + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
    pub entropies: Entropies,
    /// Columns of the table, noise columns included.
    pub n_clusters_effective: usize,
    pub noise_fraction: f64,
}

pub fn evaluate<L: Ord + Clone>(
    truth: &[L],
    assignment: &Assignment,
    policy: NoisePolicy,
) -> Result<MetricsReport, MetricsError> {
    let t = contingency(truth, assignment, policy)?;
    let e = t.entropies();
    let (h, c) = (e.homogeneity(), e.completeness());
    Ok(MetricsReport {
        homogeneity: h,
        completeness: c,
        v_measure: v_measure(h, c),
        entropies: e,
        n_clusters_effective: t.cluster_ids.len(),
        noise_fraction: t.noise_fraction,
    })
}

/// Train and test reports flattened to the result-table columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    #[serde(rename = "H-train")]
    pub h_train: f64,
    #[serde(rename = "H-test")]
    pub h_test: f64,
    #[serde(rename = "VM-train")]
    pub vm_train: f64,
    #[serde(rename = "VM-test")]
    pub vm_test: f64,
    #[serde(rename = "C-train")]
    pub c_train: f64,
    #[serde(rename = "C-test")]
    pub c_test: f64,
    pub n_clusters_train: usize,
    pub noise_fraction_train: f64,
    pub noise_fraction_test: f64,
}

impl SplitMetrics {
    pub fn new(train: &MetricsReport, test: &MetricsReport) -> Self {
        SplitMetrics {
            h_train: train.homogeneity,
            h_test: test.homogeneity,
            vm_train: train.v_measure,
            vm_test: test.v_measure,
            c_train: train.completeness,
            c_test: test.completeness,
            n_clusters_train: train.n_clusters_effective,
            noise_fraction_train: train.noise_fraction,
            noise_fraction_test: test.noise_fraction,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn asg(v: &[i64]) -> Assignment {
        Assignment::new(v.iter().map(|&x| (x >= 0).then_some(x as usize)).collect())
    }

    #[test]
    fn direct_count() {
        let t = contingency(&["A", "A", "B"], &asg(&[0, 0, 1]), NoisePolicy::default()).unwrap();
        assert_eq!(t.counts, vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(t.n, 3);
    }

    #[test]
    fn noise_policies() {
        let truth = ["A", "A", "B", "B", "B"];
        let a = asg(&[0, -1, 0, -1, 1]);
        let s = contingency(&truth, &a, NoisePolicy::NoiseAsSingletons).unwrap();
        assert_eq!(s.cluster_ids.len(), 4);
        let o = contingency(&truth, &a, NoisePolicy::NoiseAsOneCluster).unwrap();
        assert_eq!(o.cluster_ids.len(), 3);
        let d = contingency(&truth, &a, NoisePolicy::DropNoise).unwrap();
        assert_eq!(d.n, 3);
        assert!((d.noise_fraction - 0.4).abs() < 1e-15);
        assert_eq!(
            contingency(&["A"], &asg(&[-1]), NoisePolicy::DropNoise),
            Err(MetricsError::EmptyAfterDrop)
        );
        assert!(matches!(
            contingency(&["A"], &asg(&[0, 1]), NoisePolicy::DropNoise),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extremes() {
        let truth = ["A", "A", "B", "B"];
        // singletons: c = H(C)/ln n, which only tends to 0 as n grows
        let r = evaluate(&truth, &asg(&[0, 1, 2, 3]), NoisePolicy::default()).unwrap();
        assert_eq!(r.homogeneity, 1.0);
        assert!((r.completeness - 0.5).abs() < 1e-15);
        let r = evaluate(&truth, &asg(&[0, 0, 0, 0]), NoisePolicy::default()).unwrap();
        assert_eq!((r.homogeneity, r.completeness, r.v_measure), (0.0, 1.0, 0.0));
        let r = evaluate(&truth, &asg(&[5, 5, 2, 2]), NoisePolicy::default()).unwrap();
        assert_eq!((r.homogeneity, r.completeness, r.v_measure), (1.0, 1.0, 1.0));
    }

    #[test]
    fn harmonic_mean() {
        assert!((v_measure(0.8, 0.8) - 0.8).abs() < 1e-15);
        assert_eq!(v_measure(1.0, 0.0), 0.0);
        assert_eq!(v_measure(0.0, 0.0), 0.0);
    }

    fn pair() -> impl Strategy<Value = (Vec<u8>, Vec<i64>)> {
        (1usize..60).prop_flat_map(|n| {
            (proptest::collection::vec(0u8..5, n), proptest::collection::vec(-1i64..6, n))
        })
    }

    proptest! {
        #[test]
        fn permutation_invariance((t, a) in pair(), shift in 1i64..7) {
            let base = evaluate(&t, &asg(&a), NoisePolicy::NoiseAsOneCluster).unwrap();
            let relabeled: Vec<i64> = a.iter().map(|&x| if x < 0 { x } else { (x * 7 + shift) % 43 }).collect();
            let classes: Vec<u8> = t.iter().map(|&c| 4 - c).collect();
            let other = evaluate(&classes, &asg(&relabeled), NoisePolicy::NoiseAsOneCluster).unwrap();
            prop_assert!((base.homogeneity - other.homogeneity).abs() < 1e-12);
            prop_assert!((base.completeness - other.completeness).abs() < 1e-12);
            prop_assert!((base.v_measure - other.v_measure).abs() < 1e-12);
        }

        #[test]
        fn transpose_swaps((t, a) in pair()) {
            let tab = contingency(&t, &asg(&a), NoisePolicy::NoiseAsSingletons).unwrap();
            let tr = tab.transpose();
            prop_assert!((homogeneity(&tab) - completeness(&tr)).abs() < 1e-12);
            prop_assert!((completeness(&tab) - homogeneity(&tr)).abs() < 1e-12);
        }

        #[test]
        fn entropy_bounds((t, a) in pair()) {
            let r = evaluate(&t, &asg(&a), NoisePolicy::NoiseAsSingletons).unwrap();
            let e = r.entropies;
            prop_assert!(e.h_c >= 0.0 && e.h_k >= 0.0 && e.h_c_given_k >= 0.0 && e.h_k_given_c >= 0.0);
            prop_assert!(e.h_c_given_k <= e.h_c + 1e-12);
            prop_assert!(e.h_k_given_c <= e.h_k + 1e-12);
            for x in [r.homogeneity, r.completeness, r.v_measure] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!((r.v_measure - v_measure(r.homogeneity, r.completeness)).abs() < 1e-12);
        }

        #[test]
        fn refinement_never_lowers_homogeneity((t, a) in pair(), pick in 0usize..60) {
            let a: Vec<i64> = a.iter().map(|&x| x.max(0)).collect();
            let target = a[pick % a.len()];
            let split: Vec<i64> = a.iter().enumerate()
                .map(|(i, &x)| if x == target && i % 2 == 1 { 100 } else { x })
                .collect();
            let before = evaluate(&t, &asg(&a), NoisePolicy::default()).unwrap().homogeneity;
            let after = evaluate(&t, &asg(&split), NoisePolicy::default()).unwrap().homogeneity;
            prop_assert!(after >= before - 1e-12);
        }
    }
}
