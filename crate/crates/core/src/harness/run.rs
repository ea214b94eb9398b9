use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ClustererSpec, DatasetSource, ExperimentConfig, ParamValue};
use super::HarnessError;
use crate::cluster::ClusterParams;
use crate::dataset::{
    constant_columns, eliminate_features, generate_synthetic, load_dataset, load_elimination_list, train_test_split,
    Dataset, FeatureSchema, SplitTag,
};
use crate::embed::{EmbedConfig, EmbedMethod, EmbeddingModel};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, SplitMetrics};
use crate::preprocess::PreprocessPipeline;

/// Train and test splits after elimination and scaling (fit on train only).
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
    /// Raw column indices that were dropped.
    pub eliminated: Vec<usize>,
    pub pipeline: PreprocessPipeline<f64>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData, HarnessError> {
    let (train, test) = match &cfg.dataset {
        DatasetSource::File {
            path,
            test_path,
            columns,
            labels,
        } => {
            let schema = columns.map(FeatureSchema::plain).unwrap_or_else(FeatureSchema::ember);
            let all = load_dataset::<f64>(path, &schema, labels)?;
            match test_path {
                Some(tp) => (
                    all.with_split(SplitTag::Train),
                    load_dataset::<f64>(tp, &schema, labels)?.with_split(SplitTag::Test),
                ),
                None => train_test_split(&all, cfg.split.train_fraction, cfg.split.seed)?,
            }
        }
        DatasetSource::Synthetic(spec) => {
            train_test_split(&generate_synthetic::<f64>(spec)?, cfg.split.train_fraction, cfg.split.seed)?
        }
    };
    let mut drop = match &cfg.elimination.list {
        Some(p) => load_elimination_list(p)?,
        None => Vec::new(),
    };
    if cfg.elimination.drop_constant {
        drop.extend(constant_columns(&train));
    }
    drop.sort_unstable();
    drop.dedup();
    if drop.len() >= train.d() {
        return Err(HarnessError::Config("feature elimination leaves no columns".into()));
    }
    let schema = FeatureSchema::plain(train.d()).with_eliminated(drop.iter().copied())?;
    let train = eliminate_features(&train, &schema)?;
    let test = eliminate_features(&test, &schema)?;
    let pipeline = PreprocessPipeline::fit(&train)?;
    Ok(PreparedData {
        train: pipeline.transform(&train)?,
        test: pipeline.transform(&test)?,
        eliminated: drop,
        pipeline,
    })
}

/// Position of a slice in the config's lists; the canonical record order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SliceKey {
    pub representation: usize,
    pub clusterer: usize,
    pub param: usize,
    pub seed: usize,
}

/// One fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub key: SliceKey,
    pub representation: EmbedConfig,
    pub clusterer: ClustererSpec,
    pub param: ParamValue,
    pub params: ClusterParams,
    pub seed: u64,
}

impl Slice {
    /// Hex SHA-256 of everything that determines the run's outcome.
    pub fn config_key(&self, cfg: &ExperimentConfig) -> String {
        let ident = serde_json::json!({
            "name": cfg.name,
            "dataset": cfg.dataset,
            "split": cfg.split,
            "elimination": cfg.elimination,
            "noise_policy": cfg.noise_policy,
            "representation": self.representation,
            "params": self.params,
            "seed": self.seed,
        });
        hex::encode(Sha256::digest(ident.to_string().as_bytes()))
    }

    fn embed_key(&self) -> (usize, u64) {
        (self.key.representation, self.representation.seed)
    }
}

/// Cartesian product in canonical order. Autoencoder representations take
/// the slice seed; PCA ignores it.
pub fn slices(cfg: &ExperimentConfig) -> Vec<Slice> {
    let mut out = Vec::new();
    for (ri, rep) in cfg.representations.iter().enumerate() {
        for (ci, cl) in cfg.clusterers.iter().enumerate() {
            for (pi, &p) in cl.points(cfg).iter().enumerate() {
                for (si, &seed) in cfg.seeds.iter().enumerate() {
                    let mut representation = rep.clone();
                    representation.seed = match rep.method {
                        EmbedMethod::Autoencoder => seed,
                        EmbedMethod::Pca => 0,
                    };
                    out.push(Slice {
                        key: SliceKey {
                            representation: ri,
                            clusterer: ci,
                            param: pi,
                            seed: si,
                        },
                        representation,
                        clusterer: cl.clone(),
                        param: p,
                        params: cl.at(p),
                        seed,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_key: String,
    pub order: SliceKey,
    pub dataset: String,
    pub representation: String,
    pub clusterer: String,
    pub param: ParamValue,
    pub params: ClusterParams,
    pub seed: u64,
    /// Distinct clusters in the train contingency table (noise counted
    /// per the noise policy).
    pub n_clusters_effective: Option<usize>,
    /// Clusters the fitted model can emit.
    pub n_clusters_model: Option<usize>,
    pub metrics: Option<SplitMetrics>,
    pub embed_time: f64,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_failure(&self) -> bool {
        self.error.is_some()
    }

    pub fn h_train(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.h_train)
    }

    /// Equality ignoring timings.
    pub fn same_result(&self, other: &Self) -> bool {
        let strip = |r: &Self| RunRecord {
            embed_time: 0.0,
            wall_time: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

struct Embedded {
    train: Matrix<f64>,
    test: Matrix<f64>,
    secs: f64,
}

fn embed(prep: &PreparedData, rep: &EmbedConfig) -> Result<Embedded, String> {
    let t0 = Instant::now();
    let model = EmbeddingModel::fit(prep.train.features(), rep).map_err(|e| e.to_string())?;
    let train = model.transform(prep.train.features()).map_err(|e| e.to_string())?;
    let test = model.transform(prep.test.features()).map_err(|e| e.to_string())?;
    Ok(Embedded {
        train,
        test,
        secs: t0.elapsed().as_secs_f64(),
    })
}

fn blank(cfg: &ExperimentConfig, slice: &Slice) -> RunRecord {
    RunRecord {
        config_key: slice.config_key(cfg),
        order: slice.key,
        dataset: cfg.name.clone(),
        representation: slice.representation.name(),
        clusterer: slice.clusterer.name().to_string(),
        param: slice.param,
        params: slice.params.clone(),
        seed: slice.seed,
        n_clusters_effective: None,
        n_clusters_model: None,
        metrics: None,
        embed_time: 0.0,
        wall_time: 0.0,
        error: None,
    }
}

fn run_embedded(cfg: &ExperimentConfig, prep: &PreparedData, slice: &Slice, emb: Result<&Embedded, &String>) -> RunRecord {
    let mut rec = blank(cfg, slice);
    let emb = match emb {
        Ok(e) => e,
        Err(msg) => {
            rec.error = Some(format!("embedding: {msg}"));
            return rec;
        }
    };
    rec.embed_time = emb.secs;
    let t0 = Instant::now();
    let outcome = (|| -> Result<_, String> {
        let (model, train_a) = slice.params.fit(&emb.train, slice.seed).map_err(|e| e.to_string())?;
        let test_a = model.predict(&emb.test).map_err(|e| e.to_string())?;
        let tr = evaluate(prep.train.labels(), &train_a, cfg.noise_policy).map_err(|e| e.to_string())?;
        let te = evaluate(prep.test.labels(), &test_a, cfg.noise_policy).map_err(|e| e.to_string())?;
        Ok((model.n_clusters(), tr, te))
    })();
    rec.wall_time = t0.elapsed().as_secs_f64();
    match outcome {
        Ok((k, tr, te)) => {
            rec.n_clusters_effective = Some(tr.n_clusters_effective);
            rec.n_clusters_model = Some(k);
            rec.metrics = Some(SplitMetrics::new(&tr, &te));
        }
        Err(e) => rec.error = Some(e),
    }
    rec
}

/// Embeds, clusters, predicts the test split and evaluates both splits.
/// Failures come back as a record with `error` set.
pub fn run_single(cfg: &ExperimentConfig, prep: &PreparedData, slice: &Slice) -> RunRecord {
    let emb = embed(prep, &slice.representation);
    run_embedded(cfg, prep, slice, emb.as_ref())
}

#[derive(Debug, Clone, Default)]
pub struct GridOptions {
    /// Overrides the config's checkpoint file.
    pub checkpoint: Option<PathBuf>,
    /// Run at most this many not-yet-checkpointed slices, then stop as if
    /// interrupted.
    pub stop_after: Option<usize>,
    /// Overrides the config's (and the environment's) worker count.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// Canonical order; includes failed runs.
    pub records: Vec<RunRecord>,
    pub total_slices: usize,
    /// Runs taken from the checkpoint rather than executed.
    pub resumed: usize,
    pub interrupted: bool,
}

impl GridOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.is_failure()).count()
    }
}

fn read_checkpoint(path: &PathBuf) -> Result<HashMap<String, RunRecord>, HarnessError> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    for line in BufReader::new(file).lines() {
        // a torn final line from an interrupted write is simply rerun
        if let Ok(r) = serde_json::from_str::<RunRecord>(&line?) {
            done.insert(r.config_key.clone(), r);
        }
    }
    Ok(done)
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    Ok(run_grid_with(cfg, &GridOptions::default())?.records)
}

pub fn run_grid_with(cfg: &ExperimentConfig, opts: &GridOptions) -> Result<GridOutcome, HarnessError> {
    cfg.validate()?;
    let all = slices(cfg);
    let ckpt = opts.checkpoint.clone().or_else(|| cfg.checkpoint.clone());
    let mut done = match &ckpt {
        Some(p) => read_checkpoint(p)?,
        None => HashMap::new(),
    };
    let keyed: Vec<(String, &Slice)> = all.iter().map(|s| (s.config_key(cfg), s)).collect();
    let missing: Vec<&(String, &Slice)> = keyed.iter().filter(|(k, _)| !done.contains_key(k)).collect();
    let todo: Vec<&(String, &Slice)> = match opts.stop_after {
        Some(m) => missing.iter().copied().take(m).collect(),
        None => missing.clone(),
    };
    let interrupted = todo.len() < missing.len();
    let resumed = keyed.len() - missing.len();

    let fresh = if todo.is_empty() {
        Vec::new()
    } else {
        let prep = prepare(cfg)?;
        let writer = match &ckpt {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?))
            }
            None => None,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers.unwrap_or_else(|| cfg.workers()))
            .build()?;
        pool.install(|| -> Result<Vec<RunRecord>, HarnessError> {
            let mut keys: Vec<(usize, u64)> = todo.iter().map(|(_, s)| s.embed_key()).collect();
            keys.sort_unstable();
            keys.dedup();
            let embedded: HashMap<(usize, u64), Result<Embedded, String>> = keys
                .par_iter()
                .map(|&k| {
                    let rep = todo.iter().find(|(_, s)| s.embed_key() == k).expect("key from todo").1;
                    (k, embed(&prep, &rep.representation))
                })
                .collect();
            todo.par_iter()
                .map(|(_, s)| {
                    let rec = run_embedded(cfg, &prep, s, embedded[&s.embed_key()].as_ref());
                    if let Some(w) = &writer {
                        let line = serde_json::to_string(&rec)?;
                        let mut f = w.lock().expect("checkpoint writer poisoned");
                        writeln!(f, "{line}")?;
                        f.flush()?;
                    }
                    Ok(rec)
                })
                .collect()
        })?
    };
    for r in fresh {
        done.insert(r.config_key.clone(), r);
    }
    let records = keyed
        .iter()
        .filter_map(|(k, s)| {
            done.remove(k).map(|mut r| {
                r.order = s.key;
                r
            })
        })
        .collect();
    Ok(GridOutcome {
        records,
        total_slices: all.len(),
        resumed,
        interrupted,
    })
}

/// Table-4-shaped row: H-train of one representation method per component
/// count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRow {
    pub dataset: String,
    pub method: EmbedMethod,
    pub h_train: BTreeMap<usize, Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub records: Vec<RunRecord>,
    pub pivot: Vec<PivotRow>,
}

/// Derived grid: each representation method present in `cfg` (first
/// template per method) at every component count, K-Means at a single
/// cluster count, first seed only.
pub fn ablation_config(cfg: &ExperimentConfig, component_counts: &[usize]) -> Result<ExperimentConfig, HarnessError> {
    if component_counts.is_empty() {
        return Err(HarnessError::Config("ablation needs at least one component count".into()));
    }
    let mut templates: Vec<&EmbedConfig> = Vec::new();
    for r in &cfg.representations {
        if !templates.iter().any(|t| t.method == r.method) {
            templates.push(r);
        }
    }
    let representations = templates
        .iter()
        .flat_map(|t| component_counts.iter().map(|&k| EmbedConfig { k, ..(*t).clone() }))
        .collect();
    let clusterer = cfg
        .clusterers
        .iter()
        .find(|c| matches!(c, ClustererSpec::Kmeans { .. }))
        .cloned()
        .unwrap_or_else(ClustererSpec::kmeans);
    let k = cfg
        .ablation_clusters
        .or_else(|| cfg.cluster_counts.first().copied())
        .ok_or_else(|| HarnessError::Config("ablation needs ablation_clusters or cluster_counts".into()))?;
    Ok(ExperimentConfig {
        representations,
        clusterers: vec![clusterer],
        cluster_counts: vec![k],
        epsilon_levels: vec![],
        seeds: vec![cfg.seeds[0]],
        ..cfg.clone()
    })
}

pub fn run_ablation(
    cfg: &ExperimentConfig,
    component_counts: &[usize],
    opts: &GridOptions,
) -> Result<(Ablation, GridOutcome), HarnessError> {
    let derived = ablation_config(cfg, component_counts)?;
    let outcome = run_grid_with(&derived, opts)?;
    let mut pivot: Vec<PivotRow> = Vec::new();
    for (rec, rep) in outcome.records.iter().map(|r| (r, &derived.representations[r.order.representation])) {
        let row = match pivot.iter_mut().position(|p| p.method == rep.method) {
            Some(i) => &mut pivot[i],
            None => {
                pivot.push(PivotRow {
                    dataset: cfg.name.clone(),
                    method: rep.method,
                    h_train: BTreeMap::new(),
                });
                pivot.last_mut().expect("just pushed")
            }
        };
        row.h_train.insert(rep.k, rec.h_train());
    }
    Ok((
        Ablation {
            records: outcome.records.clone(),
            pivot,
        },
        outcome,
    ))
}
