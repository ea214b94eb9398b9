//! k-means++ seeding followed by Lloyd iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_width, nearest, Assignment, ClusterError};
use crate::matrix::Matrix;
use crate::scalar::{sq_dist, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KMeansModel<T> {
    pub centroids: Matrix<T>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: T,
    pub n_iter: usize,
    pub seed: u64,
    /// Inertia of every assignment step, final assignment last.
    pub inertia_history: Vec<T>,
}

impl<T: Scalar> KMeansModel<T> {
    pub fn predict(&self, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
        check_width(self.centroids.cols(), data)?;
        let (labels, _) = assign(data, &self.centroids);
        Ok(Assignment::from_ids(labels))
    }
}

fn assign<T: Scalar>(data: &Matrix<T>, centroids: &Matrix<T>) -> (Vec<usize>, Vec<T>) {
    (0..data.rows())
        .into_par_iter()
        .map(|i| nearest(data.row(i), centroids))
        .unzip()
}

fn seed_plus_plus<T: Scalar>(data: &Matrix<T>, k: usize, rng: &mut impl Rng) -> Matrix<T> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| sq_dist(data.row(i), data.row(chosen[0])).as_f64())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        let c = data.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, w)| {
            let d = sq_dist(data.row(i), c).as_f64();
            if d < *w {
                *w = d;
            }
        });
    }
    data.select_rows(&chosen)
}

/// Means of assigned points. Empty clusters move onto the points farthest
/// from their current centroid, largest distance first.
fn update<T: Scalar>(data: &Matrix<T>, labels: &[usize], dist: &[T], k: usize) -> Matrix<T> {
    let dim = data.cols();
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (row, &c) in data.iter_rows().zip(labels) {
        counts[c] += 1;
        for (s, &v) in sums.row_mut(c).iter_mut().zip(row) {
            *s += v;
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<usize> = (0..data.rows()).collect();
        far.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).expect("finite distances").then(a.cmp(&b)));
        for (&c, &p) in empty.iter().zip(&far) {
            sums.row_mut(c).copy_from_slice(data.row(p));
            counts[c] = 1;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        let inv = T::of_usize(cnt);
        sums.row_mut(c).iter_mut().for_each(|v| *v /= inv);
    }
    sums
}

pub fn fit_kmeans<T: Scalar>(
    data: &Matrix<T>,
    n_clusters: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(KMeansModel<T>, Assignment), ClusterError> {
    let n = data.rows();
    if n_clusters == 0 || n < n_clusters {
        return Err(ClusterError::TooFewSamples { n, k: n_clusters });
    }
    if !(tol >= 0.0) {
        return Err(ClusterError::InvalidParameter(format!("tol must be >= 0, got {tol}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(data, n_clusters, &mut rng);
    let mut history = Vec::new();
    let mut n_iter = 0;
    let tol = T::of(tol);
    let (labels, dist) = loop {
        let (labels, dist) = assign(data, &centroids);
        history.push(dist.iter().copied().sum::<T>());
        if n_iter == max_iter {
            break (labels, dist);
        }
        let next = update(data, &labels, &dist, n_clusters);
        let shift = next
            .iter_rows()
            .zip(centroids.iter_rows())
            .map(|(a, b)| sq_dist(a, b))
            .fold(T::zero(), T::max)
            .sqrt();
        centroids = next;
        n_iter += 1;
        if shift < tol {
            let (labels, dist) = assign(data, &centroids);
            history.push(dist.iter().copied().sum::<T>());
            break (labels, dist);
        }
    };
    let inertia = dist.iter().copied().sum::<T>();
    Ok((
        KMeansModel {
            centroids,
            inertia,
            n_iter,
            seed,
            inertia_history: history,
        },
        Assignment::from_ids(labels),
    ))
}

pub fn predict_kmeans<T: Scalar>(m: &KMeansModel<T>, data: &Matrix<T>) -> Result<Assignment, ClusterError> {
    m.predict(data)
}
