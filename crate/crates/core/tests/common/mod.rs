//! Independent reference implementations used by the integration tests.
//! Each one is written from the textbook definition, deliberately sharing no
//! code with the library beyond the matrix container.

#![allow(dead_code)]

use std::collections::HashMap;

use binclust::Matrix64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Matrix64 {
    let mut r = rng(seed);
    Matrix64::from_vec(n, d, (0..n * d).map(|_| r.random_range(lo..hi)).collect())
}

/// Gaussian-ish blobs (sum of uniforms) around `centers` random centers.
pub fn blobs(n: usize, d: usize, centers: usize, spread: f64, width: f64, seed: u64) -> (Matrix64, Vec<usize>) {
    let mut r = rng(seed);
    let c: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..d).map(|_| r.random_range(-spread..spread)).collect())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % centers;
        truth.push(k);
        for j in 0..d {
            let noise: f64 = (0..4).map(|_| r.random_range(-1.0..1.0)).sum::<f64>() * 0.5;
            data.push(c[k][j] + width * noise);
        }
    }
    (Matrix64::from_vec(n, d, data), truth)
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------- metrics

/// Noise handling as plain integers: -1 marks noise.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Singletons,
    OneCluster,
    Drop,
}

/// (h, c, v) straight from the entropy definitions over the empirical joint
/// distribution, using hash maps instead of a table.
pub fn brute_hcv(truth: &[usize], clusters: &[i64], noise: Noise) -> (f64, f64, f64) {
    let mut pairs: Vec<(usize, i64)> = Vec::new();
    let mut next_singleton = -2i64;
    for (&t, &k) in truth.iter().zip(clusters) {
        let k = if k >= 0 {
            k
        } else {
            match noise {
                Noise::Drop => continue,
                Noise::OneCluster => -1,
                Noise::Singletons => {
                    next_singleton -= 1;
                    next_singleton
                }
            }
        };
        pairs.push((t, k));
    }
    let n = pairs.len() as f64;
    let mut joint: HashMap<(usize, i64), f64> = HashMap::new();
    let mut pc: HashMap<usize, f64> = HashMap::new();
    let mut pk: HashMap<i64, f64> = HashMap::new();
    for &(t, k) in &pairs {
        *joint.entry((t, k)).or_default() += 1.0;
        *pc.entry(t).or_default() += 1.0;
        *pk.entry(k).or_default() += 1.0;
    }
    let ent = |counts: Vec<f64>| -> f64 { counts.iter().map(|&c| -(c / n) * (c / n).ln()).sum() };
    let hc = ent(pc.values().copied().collect());
    let hk = ent(pk.values().copied().collect());
    let hck = ent(joint.values().copied().collect());
    let mut hc_k = 0.0;
    let mut hk_c = 0.0;
    for (&(t, k), &c) in &joint {
        hc_k -= c / n * (c / pk[&k]).ln();
        hk_c -= c / n * (c / pc[&t]).ln();
    }
    let h = if hck == 0.0 || hc == 0.0 { 1.0 } else { 1.0 - hc_k / hc };
    let c = if hck == 0.0 || hk == 0.0 { 1.0 } else { 1.0 - hk_c / hk };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    (h, c, v)
}

// ----------------------------------------------------------------- DBSCAN

/// O(n²) DBSCAN: cores have ≥ `min_pts` points (self included) within
/// `eps`; cores within `eps` of each other share a cluster (graph
/// components by BFS); a border point takes the cluster of its
/// lowest-index core neighbour. Returns -1 for noise.
pub fn brute_dbscan(x: &Matrix64, eps: f64, min_pts: usize) -> Vec<i64> {
    let n = x.rows();
    let r2 = eps * eps;
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| sq(x.row(i), x.row(j)) <= r2).collect())
        .collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![-1i64; n];
    let mut next = 0;
    for s in 0..n {
        if !core[s] || label[s] >= 0 {
            continue;
        }
        let mut queue = vec![s];
        label[s] = next;
        while let Some(p) = queue.pop() {
            for &q in &nbrs[p] {
                if core[q] && label[q] < 0 {
                    label[q] = next;
                    queue.push(q);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if !core[i] {
            if let Some(&c) = nbrs[i].iter().find(|&&j| core[j]) {
                label[i] = label[c];
            }
        }
    }
    label
}

/// Same partition up to relabeling (noise must match exactly).
pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x < 0) != (y < 0) {
            return false;
        }
        x < 0 || (*fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
    })
}

// -------------------------------------------------------------------- HAC

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum NaiveLinkage {
    Ward,
    Average,
}

/// Greedy agglomeration recomputing every cluster-pair linkage from the
/// members at every step. Returns the partition (cluster index per point)
/// after each merge, starting with all singletons.
pub fn naive_hac(x: &Matrix64, linkage: NaiveLinkage) -> Vec<Vec<usize>> {
    let n = x.rows();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let labels = |cl: &Vec<Vec<usize>>| {
        let mut l = vec![0; n];
        for (c, m) in cl.iter().enumerate() {
            for &i in m {
                l[i] = c;
            }
        }
        l
    };
    let mut out = vec![labels(&clusters)];
    let d = x.cols();
    while clusters.len() > 1 {
        let means: Vec<Vec<f64>> = clusters
            .iter()
            .map(|m| {
                (0..d)
                    .map(|j| m.iter().map(|&i| x.row(i)[j]).sum::<f64>() / m.len() as f64)
                    .collect()
            })
            .collect();
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let v = match linkage {
                    NaiveLinkage::Ward => {
                        let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                        na * nb / (na + nb) * sq(&means[a], &means[b])
                    }
                    NaiveLinkage::Average => {
                        let mut s = 0.0;
                        for &i in &clusters[a] {
                            for &j in &clusters[b] {
                                s += sq(x.row(i), x.row(j)).sqrt();
                            }
                        }
                        s / (clusters[a].len() * clusters[b].len()) as f64
                    }
                };
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        out.push(labels(&clusters));
    }
    out
}

pub fn same_flat_partition(a: &[usize], b: &[usize]) -> bool {
    let a: Vec<i64> = a.iter().map(|&v| v as i64).collect();
    let b: Vec<i64> = b.iter().map(|&v| v as i64).collect();
    same_partition(&a, &b)
}

// ------------------------------------------------------------ eigensolver

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues in
/// descending order with unit eigenvectors as rows.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = idx.iter().map(|&i| m[i][i]).collect();
    let vecs = idx.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
    (vals, vecs)
}

/// Sample covariance with the n−1 denominator, computed entrywise.
pub fn covariance(x: &Matrix64) -> Vec<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.row(i)[j]).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| (0..n).map(|i| (x.row(i)[a] - mean[a]) * (x.row(i)[b] - mean[b])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

// ------------------------------------------------------------ autoencoder

/// Central differences of `loss` with respect to every entry of `params`.
pub fn finite_differences(params: &mut [f64], eps: f64, mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|p| {
            let orig = params[p];
            params[p] = orig + eps;
            let up = loss(params);
            params[p] = orig - eps;
            let down = loss(params);
            params[p] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}
