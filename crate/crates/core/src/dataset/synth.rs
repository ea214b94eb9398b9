//! Family-structured Gaussian blobs standing in for real feature data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Label};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_families: usize,
    /// Share of samples labeled benign, in (0, 1).
    pub benign_fraction: f64,
    pub dim: usize,
    /// Std-dev of blob-center coordinates.
    pub family_center_spread: f64,
    /// Isotropic std-dev of samples around their blob center.
    pub within_family_stddev: f64,
    /// Benign samples are spread over this many blobs, all labeled benign.
    pub benign_modes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_families: 10,
            benign_fraction: 0.5,
            dim: 20,
            family_center_spread: 10.0,
            within_family_stddev: 0.5,
            benign_modes: 5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.to_string()));
        if self.n_families == 0 {
            return bad("n_families must be >= 1");
        }
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.within_family_stddev > 0.0 && self.within_family_stddev.is_finite()) {
            return bad("within_family_stddev must be finite and > 0");
        }
        if !(self.family_center_spread > 0.0 && self.family_center_spread.is_finite()) {
            return bad("family_center_spread must be finite and > 0");
        }
        if !(self.benign_fraction > 0.0 && self.benign_fraction < 1.0) {
            return bad("benign_fraction must lie in (0, 1)");
        }
        if self.benign_modes == 0 {
            return bad("benign_modes must be >= 1");
        }
        let n_benign = self.n_benign();
        if n_benign == 0 || self.n_samples - n_benign < self.n_families || n_benign < self.benign_modes {
            return bad("n_samples too small for the requested families and benign modes");
        }
        Ok(())
    }

    pub fn n_benign(&self) -> usize {
        ((self.n_samples as f64) * self.benign_fraction).round() as usize
    }
}

/// Generating centers and per-row center index.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    /// Families first, then benign modes.
    pub centers: Matrix<f64>,
    pub center_labels: Vec<Label>,
    pub row_center: Vec<usize>,
}

pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>, DatasetError> {
    generate_synthetic_with_centers(spec).map(|(ds, _)| ds)
}

pub fn generate_synthetic_with_centers<T: Scalar>(
    spec: &SyntheticSpec,
) -> Result<(Dataset<T>, SyntheticTruth), DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_centers = spec.n_families + spec.benign_modes;
    let spread = Normal::new(0.0, spec.family_center_spread).expect("validated spread");
    let noise = Normal::new(0.0, spec.within_family_stddev).expect("validated stddev");

    let centers = Matrix::from_vec(
        n_centers,
        spec.dim,
        (0..n_centers * spec.dim).map(|_| spread.sample(&mut rng)).collect(),
    );
    let center_labels: Vec<Label> = (0..spec.n_families)
        .map(|f| Label::family(format!("fam{f:03}")))
        .chain(std::iter::repeat_n(Label::Benign, spec.benign_modes))
        .collect();

    let n_benign = spec.n_benign();
    let n_malware = spec.n_samples - n_benign;
    let mut row_center = Vec::with_capacity(spec.n_samples);
    for f in 0..spec.n_families {
        let count = n_malware / spec.n_families + usize::from(f < n_malware % spec.n_families);
        row_center.extend(std::iter::repeat_n(f, count));
    }
    for b in 0..spec.benign_modes {
        let count = n_benign / spec.benign_modes + usize::from(b < n_benign % spec.benign_modes);
        row_center.extend(std::iter::repeat_n(spec.n_families + b, count));
    }
    row_center.shuffle(&mut rng);

    let mut data = Vec::with_capacity(spec.n_samples * spec.dim);
    for &c in &row_center {
        for &mu in centers.row(c) {
            data.push(T::of(mu + noise.sample(&mut rng)));
        }
    }
    let labels = row_center.iter().map(|&c| center_labels[c].clone()).collect();
    let ids = (0..spec.n_samples).map(|i| format!("syn{i:07}")).collect();
    let ds = Dataset::new(Matrix::from_vec(spec.n_samples, spec.dim, data), labels, ids)?;
    Ok((
        ds,
        SyntheticTruth {
            centers,
            center_labels,
            row_center,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benign_proportion() {
        let spec = SyntheticSpec {
            n_samples: 1000,
            n_families: 10,
            benign_fraction: 0.5,
            ..Default::default()
        };
        let ds: Dataset<f64> = generate_synthetic(&spec).unwrap();
        let benign = ds.labels().iter().filter(|l| l.is_benign()).count();
        assert!((499..=501).contains(&benign));
        assert_eq!(ds.n_families(), 10);
        assert_eq!(ds.n_classes(), 11);
    }

    #[test]
    fn tiny_stddev_collapses_families() {
        let spec = SyntheticSpec {
            n_samples: 60,
            n_families: 3,
            benign_modes: 1,
            within_family_stddev: 1e-30,
            ..Default::default()
        };
        let (ds, truth) = generate_synthetic_with_centers::<f64>(&spec).unwrap();
        for (i, &c) in truth.row_center.iter().enumerate() {
            assert_eq!(ds.features().row(i), truth.centers.row(c));
        }
    }

    #[test]
    fn bit_identical_per_seed() {
        let spec = SyntheticSpec::default();
        let a: Dataset<f64> = generate_synthetic(&spec).unwrap();
        let b: Dataset<f64> = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c: Dataset<f64> = generate_synthetic(&SyntheticSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec { n_families: 0, ..Default::default() },
            SyntheticSpec { within_family_stddev: 0.0, ..Default::default() },
            SyntheticSpec { family_center_spread: -1.0, ..Default::default() },
            SyntheticSpec { benign_fraction: 1.0, ..Default::default() },
            SyntheticSpec { n_samples: 5, ..Default::default() },
        ] {
            assert!(matches!(spec.validate(), Err(DatasetError::InvalidSpec(_))), "{spec:?}");
        }
    }
}
