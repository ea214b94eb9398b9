//! Experiment configuration, read from TOML. See `configs/` at the
//! repository root for annotated examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::cluster::{self, ClusterParams, Linkage};
use crate::dataset::{LabelColumns, SyntheticSpec};
use crate::embed::EmbedConfig;
use crate::metrics::NoisePolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    File {
        path: PathBuf,
        /// Predefined test file; when present, `split` is ignored.
        #[serde(default)]
        test_path: Option<PathBuf>,
        /// Feature columns; the Ember width when omitted.
        #[serde(default)]
        columns: Option<usize>,
        #[serde(default)]
        labels: LabelColumns,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EliminationConfig {
    /// File of column indices to drop (one per line).
    pub list: Option<PathBuf>,
    /// Also drop columns that are constant on the training split.
    pub drop_constant: bool,
}

impl Default for EliminationConfig {
    fn default() -> Self {
        EliminationConfig {
            list: None,
            drop_constant: true,
        }
    }
}

/// A clusterer with everything but its swept parameter (cluster count, or
/// epsilon for DBSCAN).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum ClustererSpec {
    Kmeans {
        #[serde(default = "cluster::default_max_iter")]
        max_iter: usize,
        #[serde(default = "cluster::default_tol")]
        tol: f64,
    },
    Birch {
        #[serde(default)]
        threshold: Option<f64>,
        #[serde(default = "cluster::default_branching")]
        branching: usize,
    },
    Dbscan {
        #[serde(default = "cluster::default_min_pts")]
        min_pts: usize,
    },
    Hac {
        #[serde(default)]
        subset_size: Option<usize>,
        #[serde(default)]
        linkage: Linkage,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Count(usize),
    Epsilon(f64),
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Count(k) => write!(f, "{k}"),
            ParamValue::Epsilon(e) => write!(f, "{e}"),
        }
    }
}

impl ClustererSpec {
    pub fn kmeans() -> Self {
        ClustererSpec::Kmeans {
            max_iter: cluster::default_max_iter(),
            tol: cluster::default_tol(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClustererSpec::Kmeans { .. } => "kmeans",
            ClustererSpec::Birch { .. } => "birch",
            ClustererSpec::Dbscan { .. } => "dbscan",
            ClustererSpec::Hac { .. } => "hac",
        }
    }

    pub fn sweeps_epsilon(&self) -> bool {
        matches!(self, ClustererSpec::Dbscan { .. })
    }

    /// Parameter points this clusterer is swept over.
    pub fn points(&self, cfg: &ExperimentConfig) -> Vec<ParamValue> {
        if self.sweeps_epsilon() {
            cfg.epsilon_levels.iter().map(|&e| ParamValue::Epsilon(e)).collect()
        } else {
            cfg.cluster_counts.iter().map(|&k| ParamValue::Count(k)).collect()
        }
    }

    pub fn at(&self, p: ParamValue) -> ClusterParams {
        let k = match p {
            ParamValue::Count(k) => k,
            ParamValue::Epsilon(_) => 0,
        };
        match *self {
            ClustererSpec::Kmeans { max_iter, tol } => ClusterParams::Kmeans { k, max_iter, tol },
            ClustererSpec::Birch { threshold, branching } => ClusterParams::Birch { k, threshold, branching },
            ClustererSpec::Dbscan { min_pts } => ClusterParams::Dbscan {
                eps: match p {
                    ParamValue::Epsilon(e) => e,
                    ParamValue::Count(k) => k as f64,
                },
                min_pts,
            },
            ClustererSpec::Hac { subset_size, linkage } => ClusterParams::Hac { k, subset_size, linkage },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset name used in records and best-row summaries.
    pub name: String,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub elimination: EliminationConfig,
    pub representations: Vec<EmbedConfig>,
    pub clusterers: Vec<ClustererSpec>,
    #[serde(default)]
    pub cluster_counts: Vec<usize>,
    #[serde(default)]
    pub epsilon_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub parallel_runs: usize,
    #[serde(default)]
    pub noise_policy: NoisePolicy,
    /// JSON-lines file of finished runs; enables resuming.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default = "default_ablation_components")]
    pub ablation_components: Vec<usize>,
    /// Cluster count for the ablation; the first of `cluster_counts` when
    /// omitted.
    #[serde(default)]
    pub ablation_clusters: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_ablation_components() -> Vec<usize> {
    vec![10, 30, 50]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetSource::File { path, test_path, .. } = &mut self.dataset {
            fix(path);
            test_path.as_mut().map(fix);
        }
        self.elimination.list.as_mut().map(fix);
        self.checkpoint.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.representations.is_empty() {
            return bad("at least one representation is required".into());
        }
        if self.clusterers.is_empty() {
            return bad("at least one clusterer is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.parallel_runs == 0 {
            return bad("parallel_runs must be at least 1".into());
        }
        let has_eps = self.clusterers.iter().any(|c| c.sweeps_epsilon());
        let has_counts = self.clusterers.iter().any(|c| !c.sweeps_epsilon());
        if has_eps && self.epsilon_levels.is_empty() {
            return bad("DBSCAN needs epsilon_levels".into());
        }
        if has_counts && self.cluster_counts.is_empty() {
            return bad("K-Means, BIRCH and HAC need cluster_counts".into());
        }
        if let Some(e) = self.epsilon_levels.iter().find(|e| !(**e > 0.0)) {
            return bad(format!("epsilon levels must be positive, got {e}"));
        }
        if self.cluster_counts.contains(&0) {
            return bad("cluster counts must be at least 1".into());
        }
        if let Some(r) = self.representations.iter().find(|r| r.k == 0) {
            return bad(format!("representation {} has zero components", r.name()));
        }
        Ok(())
    }

    /// Worker count: `BINCLUST_WORKERS` when set to a positive integer,
    /// otherwise `parallel_runs`.
    pub fn workers(&self) -> usize {
        std::env::var("BINCLUST_WORKERS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&w| w > 0)
            .unwrap_or(self.parallel_runs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbedMethod;

    const SAMPLE: &str = r#"
name = "toy"
seeds = [0, 1]
cluster_counts = [5, 10]
epsilon_levels = [0.5]

[dataset]
source = "synthetic"
n_samples = 300
n_families = 4

[[representations]]
method = "pca"
k = 5

[[representations]]
method = "ae"
k = 5
epochs = 3

[[clusterers]]
algo = "kmeans"

[[clusterers]]
algo = "dbscan"
min_pts = 3
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.parallel_runs, 1);
        assert_eq!(cfg.split, SplitConfig::default());
        assert!(cfg.elimination.drop_constant);
        let DatasetSource::Synthetic(spec) = &cfg.dataset else { panic!() };
        assert_eq!(spec.n_samples, 300);
        assert_eq!(spec.dim, SyntheticSpec::default().dim);
        assert_eq!(cfg.representations[1].method, EmbedMethod::Autoencoder);
        assert_eq!(cfg.representations[1].epochs, 3);
        assert_eq!(cfg.clusterers[1], ClustererSpec::Dbscan { min_pts: 3 });
        assert_eq!(cfg.clusterers[1].at(ParamValue::Epsilon(0.5)), ClusterParams::Dbscan { eps: 0.5, min_pts: 3 });
    }

    #[test]
    fn rejects_missing_sweeps() {
        let no_eps = SAMPLE.replace("epsilon_levels = [0.5]", "");
        assert!(matches!(ExperimentConfig::from_toml(&no_eps), Err(HarnessError::Config(_))));
        let no_seeds = SAMPLE.replace("seeds = [0, 1]", "seeds = []");
        assert!(ExperimentConfig::from_toml(&no_seeds).is_err());
    }

    #[test]
    fn file_dataset_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(
            &p,
            "name='x'\nseeds=[0]\ncluster_counts=[2]\n[dataset]\nsource='file'\npath='data.csv'\nlabels={flag='label', family='avclass'}\n[[representations]]\nmethod='pca'\nk=2\n[[clusterers]]\nalgo='hac'\nlinkage='average'\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&p).unwrap();
        let DatasetSource::File { path, labels, .. } = &cfg.dataset else { panic!() };
        assert_eq!(path, &dir.path().join("data.csv"));
        assert_eq!(
            labels,
            &LabelColumns::FlagAndFamily {
                flag: "label".into(),
                family: "avclass".into()
            }
        );
    }
}
