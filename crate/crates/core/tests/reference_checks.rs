//! Worked examples checked against the independent implementations in
//! `common`.

mod common;

use binclust::cluster::{fit_birch, fit_hac, fit_kmeans, Assignment, Linkage};
use binclust::dataset::{generate_synthetic_with_centers, SyntheticSpec};
use binclust::embed::fit_pca;
use binclust::metrics::{contingency, evaluate, homogeneity, NoisePolicy};
use binclust::Matrix64;
use common::*;
use rand::Rng;

#[test]
fn small_table_homogeneity_matches_direct_summation() {
    // [[3,1],[0,4]]: class 0 → clusters {0,0,0,1}, class 1 → {1,1,1,1}
    let truth = [0, 0, 0, 0, 1, 1, 1, 1];
    let asg = [0i64, 0, 0, 1, 1, 1, 1, 1];
    let t = contingency(&truth, &Assignment::from_ids(asg.iter().map(|&a| a as usize)), NoisePolicy::default()).unwrap();
    assert_eq!(t.counts, vec![vec![3, 1], vec![0, 4]]);
    let (h, _, _) = brute_hcv(&truth, &asg, Noise::Singletons);
    assert!((homogeneity(&t) - h).abs() <= 1e-10);
    // 1 − (⅛·ln5 + ½·ln(5/4)) / ln2
    let closed = 1.0 - (0.125 * 5f64.ln() + 0.5 * 1.25f64.ln()) / 2f64.ln();
    assert!((h - closed).abs() < 1e-14);
    assert!((h - 0.548_794_940_695_398_6).abs() < 1e-12);
}

#[test]
fn pca_on_50_by_8_matches_jacobi() {
    let x = uniform(50, 8, -2.0, 2.0, 77);
    let (vals, vecs) = jacobi_eigen(&covariance(&x));
    let m = fit_pca(&x, 4).unwrap();
    for j in 0..4 {
        assert!((m.explained_variance[j] - vals[j]).abs() <= 1e-8);
        let dot: f64 = m.components.row(j).iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() <= 1e-8);
    }
    // column variances of the codes are the eigenvalues
    let codes = m.transform(&x).unwrap();
    for j in 0..4 {
        let col = codes.column(j);
        let mean = col.iter().sum::<f64>() / 50.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 49.0;
        assert!((var - m.explained_variance[j]).abs() <= 1e-10);
    }
}

fn inertia(x: &Matrix64, labels: &[usize], k: usize) -> f64 {
    let d = x.cols();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..d).map(|j| members.iter().map(|&i| x.row(i)[j]).sum::<f64>() / members.len() as f64).collect();
        total += members.iter().map(|&i| x.row(i).iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>();
    }
    total
}

/// Plain Lloyd from the given initial centers.
fn lloyd(x: &Matrix64, mut centers: Vec<Vec<f64>>) -> f64 {
    let k = centers.len();
    let mut labels = vec![0; x.rows()];
    for _ in 0..100 {
        for (i, row) in x.iter_rows().enumerate() {
            labels[i] = (0..k)
                .min_by(|&a, &b| {
                    let da: f64 = row.iter().zip(&centers[a]).map(|(p, q)| (p - q).powi(2)).sum();
                    let db: f64 = row.iter().zip(&centers[b]).map(|(p, q)| (p - q).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let m: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
            if !m.is_empty() {
                for j in 0..x.cols() {
                    center[j] = m.iter().map(|&i| x.row(i)[j]).sum::<f64>() / m.len() as f64;
                }
            }
        }
    }
    inertia(x, &labels, k)
}

#[test]
fn kmeans_beats_random_assignments_and_nears_exhaustive_lloyd() {
    let (x, _) = blobs(30, 2, 3, 5.0, 0.6, 5);
    let (m, _) = fit_kmeans(&x, 3, 0, 300, 1e-9).unwrap();
    let mut r = rng(5);
    let best_random = (0..1000)
        .map(|_| inertia(&x, &(0..30).map(|_| r.random_range(0..3)).collect::<Vec<_>>(), 3))
        .fold(f64::INFINITY, f64::min);
    assert!(m.inertia <= best_random);
    let mut best_lloyd = f64::INFINITY;
    for a in 0..30 {
        for b in a + 1..30 {
            for c in b + 1..30 {
                let init = [a, b, c].iter().map(|&i| x.row(i).to_vec()).collect();
                best_lloyd = best_lloyd.min(lloyd(&x, init));
            }
        }
    }
    assert!(m.inertia <= best_lloyd * 1.05, "{} vs {}", m.inertia, best_lloyd);
}

#[test]
fn kmeans_predicts_translated_point_by_exhaustive_scan() {
    let (x, _) = blobs(300, 4, 6, 3.0, 0.3, 8);
    let (m, _) = fit_kmeans(&x, 6, 2, 300, 1e-6).unwrap();
    let mut r = rng(9);
    for _ in 0..200 {
        let q: Vec<f64> = (0..4).map(|_| r.random_range(-4.0..4.0)).collect();
        let want = (0..6)
            .min_by(|&a, &b| {
                let da: f64 = q.iter().zip(m.centroids.row(a)).map(|(p, c)| (p - c).powi(2)).sum();
                let db: f64 = q.iter().zip(m.centroids.row(b)).map(|(p, c)| (p - c).powi(2)).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        let got = m.predict(&Matrix64::from_vec(1, 4, q)).unwrap().get(0);
        assert_eq!(got, Some(want));
    }
}

#[test]
fn birch_recovers_separated_blobs() {
    let (x, truth) = blobs(200, 3, 5, 10.0, 0.4, 12);
    // pick the threshold giving roughly fifty leaf subclusters
    let (m, a) = [0.1, 0.2, 0.3, 0.5]
        .iter()
        .map(|&t| fit_birch(&x, t, 10, 5).unwrap())
        .min_by_key(|(m, _)| m.leaf_subclusters.len().abs_diff(50))
        .unwrap();
    assert!((25..=100).contains(&m.leaf_subclusters.len()), "{}", m.leaf_subclusters.len());
    let asg: Vec<i64> = a.labels().iter().map(|l| l.unwrap() as i64).collect();
    let (h, _, _) = brute_hcv(&truth, &asg, Noise::Singletons);
    assert!(h >= 0.95, "h = {h}");

    // fresh draws from the same blob get the label of the blob's members
    let held = blobs(400, 3, 5, 10.0, 0.4, 12).0;
    let p = m.predict(&held).unwrap();
    for i in 200..400 {
        let blob = i % 5;
        let train_label = a.get((0..200).find(|&j| j % 5 == blob).unwrap());
        assert_eq!(p.get(i), train_label);
    }
}

#[test]
fn hac_extends_subset_labels_to_blob_members() {
    let (x, truth) = blobs(1000, 4, 6, 8.0, 0.3, 14);
    let (m, a) = fit_hac(&x, 6, 120, Linkage::Ward, 3).unwrap();
    let mut blob_label = vec![None; 6];
    for &i in &m.subset_ids {
        let l = a.get(i).unwrap();
        assert!(blob_label[truth[i]].is_none_or(|b| b == l));
        blob_label[truth[i]] = Some(l);
    }
    assert!(blob_label.iter().all(Option::is_some), "subset covers all blobs");
    for i in 0..1000 {
        assert_eq!(a.get(i), blob_label[truth[i]]);
    }
    let held = blobs(1200, 4, 6, 8.0, 0.3, 14).0;
    let p = m.predict(&held).unwrap();
    for i in 1000..1200 {
        assert_eq!(p.get(i), blob_label[i % 6]);
    }
}

#[test]
fn nearest_true_center_gives_perfect_homogeneity() {
    let spec = SyntheticSpec {
        n_samples: 3000,
        n_families: 50,
        dim: 30,
        family_center_spread: 10.0,
        within_family_stddev: 0.3,
        ..SyntheticSpec::default()
    };
    let (ds, truth) = generate_synthetic_with_centers::<f64>(&spec).unwrap();
    let nearest: Vec<usize> = ds
        .features()
        .iter_rows()
        .map(|row| {
            (0..truth.centers.rows())
                .min_by(|&a, &b| {
                    let da: f64 = row.iter().zip(truth.centers.row(a)).map(|(p, c)| (p - c).powi(2)).sum();
                    let db: f64 = row.iter().zip(truth.centers.row(b)).map(|(p, c)| (p - c).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap()
        })
        .collect();
    let r = evaluate(ds.labels(), &Assignment::from_ids(nearest), NoisePolicy::default()).unwrap();
    assert_eq!(r.homogeneity, 1.0);
}
