//! Command-line front end.

mod experiment;
mod project;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, evaluate, write_summary_csv, CrossValReport, EvalReport, Execution,
};
use crate::graph_data::{generate_synthetic, load_dataset, Dataset, SynthConfig};
use crate::label_encoding::{
    compact, fetch_table, load_embedding_table, one_hot_table, read_embedding_file,
    synth_hierarchical_table, EmbeddingEndpointConfig, LabelVocabulary,
};
use crate::sage_model::SageModel;
use crate::stats::{compare_encodings_with, CompareOptions, ComparisonResult, WilcoxonOptions};
use crate::training::{train, write_history_csv, LossKind, TrainConfig, TrainedModel};

pub use experiment::{
    default_prompt_template, file_stem, EncodingSource, EncodingSpec, ExperimentConfig, TOKEN_ENV,
};
pub use project::{project_2d, write_projection_csv};

#[derive(Debug, Parser)]
#[command(name = "semlabel", version, about = "GraphSAGE node classification with semantic label encodings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic project graph dataset.
    GenData(GenDataArgs),
    /// Build a label embedding table.
    Embed(EmbedArgs),
    /// Truncate an embedding table to its first D components and renormalize.
    Compact(CompactArgs),
    /// Train one model and write its checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Leave-one-project-out cross-validation for every encoding of an experiment.
    Crossval(CrossvalArgs),
    /// Normality-gated significance tests between cross-validation reports.
    Compare(CompareArgs),
    /// 2-D PCA coordinates of an embedding table (a deterministic stand-in for t-SNE plots).
    Project2d(Project2dArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// SynthConfig JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_projects: Option<usize>,
    #[arg(long)]
    pub generic_types: Option<usize>,
    #[arg(long)]
    pub subtypes_per_type: Option<usize>,
    #[arg(long)]
    pub nodes_per_project: Option<usize>,
    #[arg(long)]
    pub intra_edge_prob: Option<f64>,
    #[arg(long)]
    pub inter_edge_prob: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub sibling_confusion: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedMode {
    Onehot,
    Synth,
    Fetch,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Take the label vocabulary from this dataset file.
    #[arg(long, conflicts_with = "bim_subtypes", required_unless_present = "bim_subtypes")]
    pub dataset: Option<PathBuf>,
    /// Use the built-in 42-label BIM subtype vocabulary.
    #[arg(long)]
    pub bim_subtypes: bool,
    #[arg(long, value_enum)]
    pub mode: EmbedMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Table width for `--mode synth`.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = experiment::default_within_group_cos())]
    pub within_group_cos: f64,
    /// Base URL of an OpenAI-compatible embeddings service.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    /// Text sent per label; `{label}` is replaced by the label name.
    #[arg(long, default_value = "{label}")]
    pub prompt_template: String,
    #[arg(long, env = TOKEN_ENV, hide_env_values = true)]
    pub api_token: Option<String>,
    /// Compact to this many dimensions after building.
    #[arg(long)]
    pub compact: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompactArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Cosine,
    Softmax,
    SigmoidBce,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Cosine => LossKind::CosineEmbedding,
            LossArg::Softmax => LossKind::SoftmaxCrossEntropy,
            LossArg::SigmoidBce => LossKind::SigmoidBinaryCrossEntropy,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainOverrides {
    /// TrainConfig JSON; flags override its fields.
    #[arg(long = "train-config")]
    pub train_config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(l) = self.loss {
            cfg.loss_kind = l.into();
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.early_stop_patience {
            cfg.early_stop_patience = Some(v);
        }
        cfg
    }

    fn resolve(&self) -> Result<TrainConfig> {
        let base = match &self.train_config {
            Some(p) => serde_json::from_slice(&fs::read(p)?)?,
            None => TrainConfig::default(),
        };
        let cfg = self.apply(base);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    /// Leave the nodes of this project out of training.
    #[arg(long)]
    pub exclude_project: Option<String>,
    #[command(flatten)]
    pub train: TrainOverrides,
    /// Checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV output.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecodeArg {
    /// Nearest table row by cosine similarity (cosine-trained models).
    Nearest,
    /// Highest output component (softmax or sigmoid baselines).
    Argmax,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = DecodeArg::Nearest)]
    pub decode: DecodeArg,
    /// Only score nodes of this project.
    #[arg(long)]
    pub project: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// ExperimentConfig JSON; relative paths inside resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Run folds one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Two or more cross-validation report files.
    #[arg(long, num_args = 2.., required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value_t = crate::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Apply a continuity correction to the Wilcoxon z.
    #[arg(long)]
    pub continuity_correction: bool,
    /// Rank zero differences before discarding them (Pratt) instead of dropping them first.
    #[arg(long)]
    pub pratt: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Project2dArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&a),
        Command::Embed(a) => cmd_embed(&a),
        Command::Compact(a) => cmd_compact(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Crossval(a) => cmd_crossval(&a).map(|_| ()),
        Command::Compare(a) => cmd_compare(&a),
        Command::Project2d(a) => cmd_project2d(&a),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    load_dataset(&fs::read(path)?)
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => serde_json::from_slice(&fs::read(p)?)?,
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$(if let Some(v) = a.$f { cfg.$f = v; })*};
    }
    set!(
        seed,
        n_projects,
        generic_types,
        subtypes_per_type,
        nodes_per_project,
        intra_edge_prob,
        inter_edge_prob,
        feature_dim,
        sibling_confusion
    );
    let ds = generate_synthetic(&cfg)?;
    write_file(&a.out, ds.to_json()?)
}

pub fn cmd_embed(a: &EmbedArgs) -> Result<()> {
    let vocab = match &a.dataset {
        Some(p) => read_dataset(p)?.vocabulary().clone(),
        None => LabelVocabulary::bim_subtypes(),
    };
    let table = match a.mode {
        EmbedMode::Onehot => one_hot_table(&vocab)?,
        EmbedMode::Synth => synth_hierarchical_table(&vocab, a.dim, a.seed, a.within_group_cos)?,
        EmbedMode::Fetch => {
            let base = a
                .endpoint
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--mode fetch needs --endpoint".into()))?;
            let model = a
                .model
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("--mode fetch needs --model".into()))?;
            let endpoint = EmbeddingEndpointConfig {
                auth_token: a.api_token.clone(),
                batch_size: a.batch_size,
                timeout_secs: a.timeout_secs,
                ..EmbeddingEndpointConfig::new(base.clone(), model.clone())
            };
            fetch_table(&endpoint, &vocab, &a.prompt_template)?
        }
    };
    let table = match a.compact {
        Some(d) => compact(&table, d)?,
        None => table,
    };
    write_file(&a.out, table.to_json(&vocab)?)
}

pub fn cmd_compact(a: &CompactArgs) -> Result<()> {
    let (vocab, table) = read_embedding_file(&fs::read(&a.table)?)?;
    write_file(&a.out, compact(&table, a.dim)?.to_json(&vocab)?)
}

fn project_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.projects()
        .iter()
        .position(|p| p == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown project {name:?}")))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let table = load_embedding_table(&fs::read(&a.table)?, ds.vocabulary())?;
    let cfg = a.train.resolve()?;
    let excluded = a
        .exclude_project
        .as_deref()
        .map(|p| project_index(&ds, p))
        .transpose()?;
    let ids: Vec<usize> = ds
        .nodes()
        .iter()
        .filter(|n| Some(n.project_id) != excluded)
        .map(|n| n.id)
        .collect();
    let (trained, history) = train(&ds, &ids, &table, &cfg)?;
    write_file(&a.out, trained.model.to_checkpoint_json()?)?;
    if let Some(h) = &a.history {
        let mut buf = Vec::new();
        write_history_csv(&history, &mut buf)?;
        write_file(h, buf)?;
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let table = load_embedding_table(&fs::read(&a.table)?, ds.vocabulary())?;
    let model = SageModel::from_checkpoint_json(&fs::read(&a.model)?)?;
    let loss_kind = match a.decode {
        DecodeArg::Nearest => LossKind::CosineEmbedding,
        DecodeArg::Argmax => LossKind::SoftmaxCrossEntropy,
    };
    let ids = match &a.project {
        Some(p) => ds.project_nodes(project_index(&ds, p)?),
        None => (0..ds.len()).collect(),
    };
    let report: EvalReport = evaluate(&TrainedModel { model, loss_kind }, &ds, &ids, &table)?;
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    write_file(&a.out, s)
}

/// Runs every encoding of the experiment and writes one report per
/// encoding, the table each encoding used, and `summary.csv`. Returns the
/// written report paths.
pub fn cmd_crossval(a: &CrossvalArgs) -> Result<Vec<PathBuf>> {
    let mut cfg = ExperimentConfig::from_json(&fs::read(&a.config)?)?;
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.hidden_dim {
        cfg.train.hidden_dim = v;
    }
    if let Some(v) = a.seed {
        cfg.train.seed = v;
    }
    if a.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    let base = a.config.parent().unwrap_or(Path::new(""));
    let out_dir = match &a.out_dir {
        Some(d) => d.clone(),
        None => base.join(&cfg.output_dir),
    };
    let ds = cfg.load_dataset(base)?;

    let mut reports = Vec::with_capacity(cfg.encodings.len());
    let mut tables = Vec::with_capacity(cfg.encodings.len());
    for spec in &cfg.encodings {
        let started = std::time::Instant::now();
        let run = || -> Result<_> {
            let table = spec.build(ds.vocabulary(), base)?;
            let train_cfg = TrainConfig {
                loss_kind: spec.loss_kind(),
                ..cfg.train.clone()
            };
            let report = cross_validate(&ds, &spec.name, &table, &train_cfg, cfg.execution)?;
            Ok((table, report))
        };
        let (table, report) = run().map_err(|e| e.in_encoding(&spec.name))?;
        log::info!(
            "{}: weighted F1 {:.4} in {:.1?}",
            spec.name,
            report.weighted_f1,
            started.elapsed()
        );
        tables.push(table);
        reports.push(report);
    }

    fs::create_dir_all(&out_dir)?;
    let mut paths = Vec::with_capacity(reports.len());
    for ((spec, table), report) in cfg.encodings.iter().zip(&tables).zip(&reports) {
        let stem = file_stem(&spec.name);
        write_file(&out_dir.join(format!("{stem}.table.json")), table.to_json(ds.vocabulary())?)?;
        let path = out_dir.join(format!("{stem}.report.json"));
        write_file(&path, report.to_json()?)?;
        paths.push(path);
    }
    let mut csv = Vec::new();
    write_summary_csv(&reports, &mut csv)?;
    write_file(&out_dir.join("summary.csv"), csv)?;
    Ok(paths)
}

#[derive(Debug, Serialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub n: usize,
    pub normality_w: f64,
    pub normality_p: f64,
    pub test_name: &'static str,
    pub statistic: f64,
    pub p: f64,
    pub significant: bool,
    pub normal_path_taken: bool,
}

impl PairComparison {
    fn new(a: &str, b: &str, r: &ComparisonResult) -> Self {
        Self {
            a: a.to_string(),
            b: b.to_string(),
            n: r.normality.n_effective,
            normality_w: r.normality.statistic,
            normality_p: r.normality.p_value,
            test_name: r.significance.test.name(),
            statistic: r.significance.statistic,
            p: r.significance.p_value,
            significant: r.significant,
            normal_path_taken: r.normal_path_taken,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub wilcoxon: WilcoxonOptions,
    pub comparisons: Vec<PairComparison>,
}

/// Compares every pair of reports (in argument order).
pub fn compare_reports(
    reports: &[CrossValReport],
    opts: CompareOptions,
) -> Result<ComparisonReport> {
    let mut comparisons = Vec::new();
    for i in 0..reports.len() {
        for j in (i + 1)..reports.len() {
            let (a, b) = (&reports[i], &reports[j]);
            let pair = format!("{} vs {}", a.encoding, b.encoding);
            let r = crate::evaluation::collect_paired_scores(a, b)
                .and_then(|(x, y)| compare_encodings_with(&x, &y, opts))
                .map_err(|e| e.in_encoding(&pair))?;
            comparisons.push(PairComparison::new(&a.encoding, &b.encoding, &r));
        }
    }
    Ok(ComparisonReport {
        alpha: opts.alpha,
        wilcoxon: opts.wilcoxon,
        comparisons,
    })
}

pub fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| CrossValReport::from_json(&fs::read(p)?))
        .collect::<Result<Vec<_>>>()?;
    let opts = CompareOptions {
        alpha: a.alpha,
        wilcoxon: WilcoxonOptions {
            zero_method: if a.pratt {
                crate::stats::ZeroMethod::Pratt
            } else {
                crate::stats::ZeroMethod::Wilcox
            },
            continuity_correction: a.continuity_correction,
        },
    };
    let out = compare_reports(&reports, opts)?;
    let mut s = serde_json::to_string_pretty(&out)?;
    s.push('\n');
    write_file(&a.out, s)
}

pub fn cmd_project2d(a: &Project2dArgs) -> Result<()> {
    let (vocab, table) = read_embedding_file(&fs::read(&a.table)?)?;
    let points = project_2d(&table)?;
    let mut buf = Vec::new();
    write_projection_csv(&vocab, &points, &mut buf)?;
    write_file(&a.out, buf)
}
