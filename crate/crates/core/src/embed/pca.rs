//! Exact PCA from a dense symmetric eigendecomposition.
//!
//! When `d <= n` the `d × d` sample covariance is decomposed directly;
//! otherwise the `n × n` Gram matrix of the centered data is decomposed and
//! its eigenvectors are mapped back to feature space.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EmbedError;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `k × d`, one principal axis per row.
    pub components: Matrix<T>,
    /// Eigenvalues of the sample covariance (denominator `n − 1`), descending.
    pub explained_variance: Vec<T>,
    /// Trace of the sample covariance.
    pub total_variance: T,
}

impl<T: Scalar> PcaModel<T> {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    pub fn transform(&self, data: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
        if data.cols() != self.dim() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim(),
                found: data.cols(),
            });
        }
        let k = self.k();
        let mut out = Matrix::zeros(data.rows(), k);
        let mut centered = vec![T::zero(); self.dim()];
        for (i, row) in data.iter_rows().enumerate() {
            for ((c, &x), &m) in centered.iter_mut().zip(row).zip(&self.mean) {
                *c = x - m;
            }
            for j in 0..k {
                out[(i, j)] = crate::scalar::dot(&centered, self.components.row(j));
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, codes: &Matrix<T>) -> Result<Matrix<T>, EmbedError> {
        if codes.cols() != self.k() {
            return Err(EmbedError::DimensionMismatch {
                expected: self.k(),
                found: codes.cols(),
            });
        }
        let mut out = Matrix::zeros(codes.rows(), self.dim());
        for (i, code) in codes.iter_rows().enumerate() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (j, &c) in code.iter().enumerate() {
                for (o, &v) in row.iter_mut().zip(self.components.row(j)) {
                    *o += c * v;
                }
            }
        }
        Ok(out)
    }
}

pub fn fit_pca<T: Scalar>(data: &Matrix<T>, k: usize) -> Result<PcaModel<T>, EmbedError> {
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(EmbedError::TooFewSamples(n));
    }
    if k == 0 || k > d || k > n - 1 {
        return Err(EmbedError::InvalidK { k, n, d });
    }
    let mean64: Vec<f64> = data.column_means().into_iter().map(Scalar::as_f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)].as_f64() - mean64[j]);
    let denom = (n - 1) as f64;

    let (values, vectors) = if d <= n {
        let cov = centered.tr_mul(&centered) / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let values: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
        let vectors: Vec<Vec<f64>> = order
            .iter()
            .take(k)
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        (values, vectors)
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let mut values = Vec::with_capacity(k);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let lambda = eig.eigenvalues[i];
            let u = eig.eigenvectors.column(i);
            let v = centered.tr_mul(&u);
            values.push(lambda);
            vectors.push(v.iter().copied().collect());
        }
        orthonormalize(&mut vectors);
        (values, vectors)
    };

    let mut comps = Vec::with_capacity(k * d);
    for mut v in vectors {
        canonical_sign(&mut v);
        comps.extend(v.into_iter().map(T::of));
    }
    let total: f64 = (0..d)
        .map(|j| centered.column(j).iter().map(|v| v * v).sum::<f64>() / denom)
        .sum();
    Ok(PcaModel {
        mean: mean64.into_iter().map(T::of).collect(),
        components: Matrix::from_vec(k, d, comps),
        explained_variance: values.into_iter().map(T::of).collect(),
        total_variance: T::of(total),
    })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Modified Gram-Schmidt. Vectors that vanish (null directions of a
/// rank-deficient Gram matrix) are replaced by the first coordinate axis
/// that is independent of the earlier ones.
fn orthonormalize(vs: &mut [Vec<f64>]) {
    let d = vs.first().map_or(0, Vec::len);
    let mut axis = 0;
    for i in 0..vs.len() {
        loop {
            for j in 0..i {
                let (done, rest) = vs.split_at_mut(i);
                let p: f64 = done[j].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                rest[0].iter_mut().zip(&done[j]).for_each(|(x, q)| *x -= p * q);
            }
            let norm = vs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 {
                vs[i].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            vs[i] = (0..d).map(|c| if c == axis { 1.0 } else { 0.0 }).collect();
            axis += 1;
        }
    }
}
