//! Command-line front end for the binclust pipeline.
//!
//! Exit codes: 0 success, 2 a grid finished with failed runs, 1 fatal error.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use binclust::cluster::{Assignment, ClusterModel, ClusterParams, Linkage, DEFAULT_BRANCHING, DEFAULT_MIN_PTS};
use binclust::dataset::{
    eliminate_features, generate_synthetic, load_dataset, load_elimination_list, read_binary,
    train_test_split, write_binary, write_text, FeatureSchema, LabelColumns, SyntheticSpec, BINARY_MAGIC,
};
use binclust::embed::{Activation, EmbedConfig, EmbedMethod, EmbeddingModel};
use binclust::harness::{
    emit_report, read_records, run_ablation, run_grid_with, write_pivot, ExperimentConfig, GridOptions,
    ReportFormat,
};
use binclust::metrics::{evaluate, NoisePolicy};
use binclust::{Dataset64, Pipeline64};

#[derive(Parser)]
#[command(name = "binclust", version, about = "Cluster malware and benign binaries by static features")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Validate a delimited dataset and convert it to the binary format.
    Ingest(IngestArgs),
    /// Seeded train/test split.
    Split(SplitArgs),
    /// Fit the scaling chain on train data and apply it.
    Preprocess(PreprocessArgs),
    /// Fit PCA or an autoencoder on train data and embed.
    Embed(EmbedArgs),
    /// Fit a clusterer and write the training assignment.
    Fit(FitArgs),
    /// Assign new rows with a fitted clusterer.
    Predict(PredictArgs),
    /// Homogeneity, completeness and V-measure of an assignment.
    Evaluate(EvaluateArgs),
    /// Run an experiment grid from a config file.
    Grid(GridArgs),
    /// Component-count ablation with K-Means.
    Ablate(AblateArgs),
    /// Re-emit saved records (JSON or checkpoint) as a report.
    Report(ReportArgs),
}

#[derive(Args)]
struct LabelArgs {
    /// Column holding `benign` / `family:<name>`.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Use a 0/1 malicious-flag column plus a family column instead.
    #[arg(long, requires = "family_column")]
    flag_column: Option<String>,
    #[arg(long)]
    family_column: Option<String>,
    /// Expected feature columns: a number or `ember`; inferred from the
    /// header when omitted.
    #[arg(long)]
    columns: Option<String>,
}

impl LabelArgs {
    fn spec(&self) -> LabelColumns {
        match (&self.flag_column, &self.family_column) {
            (Some(flag), Some(family)) => LabelColumns::FlagAndFamily {
                flag: flag.clone(),
                family: family.clone(),
            },
            _ => LabelColumns::Tagged {
                column: self.label_column.clone(),
            },
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    families: usize,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    benign_fraction: f64,
    #[arg(long, default_value_t = 10.0)]
    spread: f64,
    #[arg(long, default_value_t = 0.5)]
    stddev: f64,
    #[arg(long, default_value_t = 5)]
    benign_modes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    /// Where to save the fitted pipeline.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, requires = "test_out")]
    test: Option<PathBuf>,
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Column indices to drop before scaling, one per line.
    #[arg(long)]
    eliminate: Option<PathBuf>,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pca,
    Ae,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Linear,
    Relu,
    Sigmoid,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, requires = "test_out")]
    test: Option<PathBuf>,
    #[arg(long)]
    test_out: Option<PathBuf>,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Kmeans,
    Birch,
    Dbscan,
    Hac,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Ward,
    Average,
    Complete,
    Single,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Training assignment as `id,cluster` (empty cluster = noise).
    #[arg(long)]
    assignments: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    min_pts: usize,
    /// BIRCH absorption threshold; half the mean pairwise distance of a
    /// 1000-row sample when omitted.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BRANCHING)]
    branching: usize,
    #[arg(long)]
    subset_size: Option<usize>,
    #[arg(long, value_enum, default_value = "ward")]
    linkage: LinkageArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Singletons,
    OneCluster,
    Drop,
}

impl From<NoiseArg> for NoisePolicy {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Singletons => NoisePolicy::NoiseAsSingletons,
            NoiseArg::OneCluster => NoisePolicy::NoiseAsOneCluster,
            NoiseArg::Drop => NoisePolicy::DropNoise,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset supplying the true labels.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    #[arg(long, value_enum, default_value = "singletons")]
    noise: NoiseArg,
    #[command(flatten)]
    labels: LabelArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn format_for(fmt: Option<FormatArg>, path: &Path) -> ReportFormat {
    match fmt {
        Some(FormatArg::Csv) => ReportFormat::Delimited,
        Some(FormatArg::Json) => ReportFormat::Json,
        None => ReportFormat::from_path(path),
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the output's extension.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Table of H-train per method and component count.
    #[arg(long)]
    pivot: PathBuf,
    /// Comma-separated component counts; the config's list when omitted.
    #[arg(long, value_delimiter = ',')]
    components: Vec<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn is_binary(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 4];
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(std::io::Read::read(&mut f, &mut magic)? == 4 && &magic == BINARY_MAGIC)
}

/// Binary files carry their own width; text files are checked against
/// `--columns` or the header.
fn read_data(path: &Path, labels: &LabelArgs) -> Result<Dataset64> {
    if is_binary(path)? {
        return Ok(read_binary(path)?);
    }
    let spec = labels.spec();
    let schema = match labels.columns.as_deref() {
        Some("ember") => FeatureSchema::ember(),
        Some(n) => FeatureSchema::plain(n.parse().context("--columns takes a number or `ember`")?),
        None => {
            let mut header = String::new();
            BufReader::new(File::open(path)?).read_line(&mut header)?;
            let extra = match spec {
                LabelColumns::Tagged { .. } => 2,
                LabelColumns::FlagAndFamily { .. } => 3,
            };
            let fields = header.trim_end().split(',').count();
            ensure!(fields > extra, "{}: header has no feature columns", path.display());
            FeatureSchema::plain(fields - extra)
        }
    };
    load_dataset(path, &schema, &spec).with_context(|| format!("loading {}", path.display()))
}

/// `.csv` / `.txt` → delimited text, anything else binary.
fn write_data(ds: &Dataset64, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("txt") => write_text(ds, path)?,
        _ => write_binary(ds, path)?,
    }
    Ok(())
}

fn write_assignment(ds: &Dataset64, a: &Assignment, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "cluster"])?;
    for (id, l) in ds.ids().iter().zip(a.labels()) {
        w.write_record([id.clone(), l.map(|c| c.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_assignment(path: &Path) -> Result<(Vec<String>, Assignment)> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut ids, mut labels) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        let c = rec.get(1).unwrap_or_default().trim();
        labels.push(if c.is_empty() { None } else { Some(c.parse()?) });
    }
    Ok((ids, Assignment::new(labels)))
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: a.n,
        n_families: a.families,
        benign_fraction: a.benign_fraction,
        dim: a.dim,
        family_center_spread: a.spread,
        within_family_stddev: a.stddev,
        benign_modes: a.benign_modes,
        seed: a.seed,
    };
    let ds = generate_synthetic::<f64>(&spec)?;
    write_data(&ds, &a.out)?;
    println!("wrote {} rows × {} features to {}", ds.n(), ds.d(), a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = read_data(&a.input, &a.labels)?;
    write_binary(&ds, &a.out)?;
    println!(
        "{} rows × {} features, {} families, {} benign",
        ds.n(),
        ds.d(),
        ds.n_families(),
        ds.labels().iter().filter(|l| l.is_benign()).count()
    );
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let ds = read_data(&a.input, &a.labels)?;
    let (train, test) = train_test_split(&ds, a.train_fraction, a.seed)?;
    write_data(&train, &a.train_out)?;
    write_data(&test, &a.test_out)?;
    println!("train {} / test {}", train.n(), test.n());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let mut train = read_data(&a.train, &a.labels)?;
    let mut test = a.test.as_deref().map(|p| read_data(p, &a.labels)).transpose()?;
    if let Some(list) = &a.eliminate {
        let schema = FeatureSchema::plain(train.d()).with_eliminated(load_elimination_list(list)?)?;
        train = eliminate_features(&train, &schema)?;
        test = test.map(|t| eliminate_features(&t, &schema)).transpose()?;
        println!("{} columns retained", train.d());
    }
    let p = Pipeline64::fit(&train)?;
    p.save(&a.model)?;
    write_data(&p.transform(&train)?, &a.train_out)?;
    if let (Some(t), Some(out)) = (test, &a.test_out) {
        write_data(&p.transform(&t)?, out)?;
    }
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let train = read_data(&a.train, &a.labels)?;
    let cfg = EmbedConfig {
        method: match a.method {
            MethodArg::Pca => EmbedMethod::Pca,
            MethodArg::Ae => EmbedMethod::Autoencoder,
        },
        k: a.components,
        seed: a.seed,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        activation: match a.activation {
            ActivationArg::Linear => Activation::Linear,
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        },
    };
    let m = EmbeddingModel::fit(train.features(), &cfg)?;
    m.save(&a.model)?;
    write_data(&train.replace_features(m.transform(train.features())?)?, &a.train_out)?;
    if let (Some(t), Some(out)) = (&a.test, &a.test_out) {
        let test = read_data(t, &a.labels)?;
        write_data(&test.replace_features(m.transform(test.features())?)?, out)?;
    }
    println!("{} → {} components", train.d(), m.k());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let ds = read_data(&a.data, &a.labels)?;
    let need_k = || a.k.context("--k is required for this algorithm");
    let params = match a.algo {
        AlgoArg::Kmeans => ClusterParams::kmeans(need_k()?),
        AlgoArg::Birch => ClusterParams::Birch {
            k: need_k()?,
            threshold: a.threshold,
            branching: a.branching,
        },
        AlgoArg::Dbscan => ClusterParams::Dbscan {
            eps: a.eps.context("--eps is required for dbscan")?,
            min_pts: a.min_pts,
        },
        AlgoArg::Hac => ClusterParams::Hac {
            k: need_k()?,
            subset_size: a.subset_size,
            linkage: match a.linkage {
                LinkageArg::Ward => Linkage::Ward,
                LinkageArg::Average => Linkage::Average,
                LinkageArg::Complete => Linkage::Complete,
                LinkageArg::Single => Linkage::Single,
            },
        },
    };
    let (model, assignment) = params.fit(ds.features(), a.seed)?;
    model.save(&a.model)?;
    if let Some(out) = &a.assignments {
        write_assignment(&ds, &assignment, out)?;
    }
    println!(
        "{}: {} clusters, {} noise points",
        params.algo_name(),
        model.n_clusters(),
        assignment.noise_count()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let ds = read_data(&a.data, &a.labels)?;
    let model = ClusterModel::<f64>::load(&a.model)?;
    write_assignment(&ds, &model.predict(ds.features())?, &a.out)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let ds = read_data(&a.data, &a.labels)?;
    let (ids, assignment) = read_assignment(&a.assignments)?;
    ensure!(ids.as_slice() == ds.ids(), "assignment ids do not match the dataset rows");
    let r = evaluate(ds.labels(), &assignment, a.noise.into())?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn grid(a: GridArgs) -> Result<ExitCode> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let opts = GridOptions {
        checkpoint: a.checkpoint,
        stop_after: None,
        workers: a.workers,
    };
    let outcome = run_grid_with(&cfg, &opts)?;
    let summary = emit_report(&outcome.records, &a.out, format_for(a.format, &a.out))?;
    println!(
        "{} runs ({} resumed, {} failed); best summary in {}",
        summary.records,
        outcome.resumed,
        summary.failures,
        summary.best_path.display()
    );
    for b in &summary.best {
        println!("best {}: {} {} {} H-train {:.4}", b.dataset, b.representation, b.clusterer, b.param, b.h_train);
    }
    Ok(if summary.failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn ablate(a: AblateArgs) -> Result<ExitCode> {
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let counts = if a.components.is_empty() { cfg.ablation_components.clone() } else { a.components };
    let opts = GridOptions {
        checkpoint: a.checkpoint,
        stop_after: None,
        workers: a.workers,
    };
    let (ablation, outcome) = run_ablation(&cfg, &counts, &opts)?;
    let summary = emit_report(&ablation.records, &a.out, format_for(a.format, &a.out))?;
    write_pivot(&ablation.pivot, &a.pivot)?;
    println!("{} runs, {} failed", summary.records, summary.failures);
    std::io::stdout().write_all(&std::fs::read(&a.pivot)?)?;
    Ok(if outcome.failures() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn report(a: ReportArgs) -> Result<()> {
    let records = read_records(&a.input)?;
    if records.is_empty() {
        bail!("{} holds no records", a.input.display());
    }
    let s = emit_report(&records, &a.out, format_for(a.format, &a.out))?;
    println!("{} records, {} failed", s.records, s.failures);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Synth(a) => synth(a)?,
        Cmd::Ingest(a) => ingest(a)?,
        Cmd::Split(a) => split(a)?,
        Cmd::Preprocess(a) => preprocess(a)?,
        Cmd::Embed(a) => embed(a)?,
        Cmd::Fit(a) => fit(a)?,
        Cmd::Predict(a) => predict(a)?,
        Cmd::Evaluate(a) => evaluate_cmd(a)?,
        Cmd::Grid(a) => return grid(a),
        Cmd::Ablate(a) => return ablate(a),
        Cmd::Report(a) => report(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
