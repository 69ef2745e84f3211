use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use textclf::eval::Method;

#[derive(Debug, Parser)]
#[command(name = "textclf", version, about = "Toxic-comment classification workbench", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, balance and split the corpus; write the splits, training
    /// vocabulary and training DTM.
    Prepare(PrepareArgs),
    /// Train one method on the training split and score the held-out split.
    Train(TrainArgs),
    /// Label one text per input line with a saved model.
    Predict(PredictArgs),
    /// Repeated balanced runs of several methods with aggregated metrics.
    Benchmark(BenchmarkArgs),
    /// Two-dimensional projections of a document-term matrix.
    #[command(subcommand)]
    Viz(VizCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Benchmark(_) => "benchmark",
            Command::Viz(VizCommand::Pca(_)) => "viz pca",
            Command::Viz(VizCommand::Tsne(_)) => "viz tsne",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum VizCommand {
    Pca(VizArgs),
    Tsne(TsneArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BalanceArg {
    Strict,
    DownsampleToxic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NbArg {
    Gaussian,
    Multinomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceArg {
    Euclidean,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Rbf,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Mse,
    Xent,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CommonArgs {
    /// Flat `key = value` file (keys are long flag names) or a manifest.json
    /// from an earlier run. Explicit flags win over it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "./results")]
    pub out: PathBuf,
    /// Run everything on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DataArgs {
    /// Labelled corpus CSV; the bundled micro-corpus when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// How to balance classes: down-sample the non-toxic majority (strict)
    /// or also allow down-sampling toxic.
    #[arg(long, value_enum, default_value_t = BalanceArg::Strict)]
    pub balance: BalanceArg,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BowArgs {
    /// Stop-word file, one token per line; the built-in English list when
    /// omitted.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Drop terms absent from more than this fraction of training documents.
    #[arg(long, default_value_t = 0.99)]
    pub max_sparsity: f64,
    #[arg(long, value_enum, default_value_t = NbArg::Gaussian)]
    pub nb: NbArg,
    /// Neighbours for kNN (odd).
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = DistanceArg::Euclidean)]
    pub distance: DistanceArg,
    /// SVM box constraint C.
    #[arg(long, default_value_t = 1.0)]
    pub svm_c: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    pub kernel: KernelArg,
    /// RBF width; 1 / feature count when omitted.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CnnArgs {
    /// Word-vector text file; selects the frozen-embedding CNN.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Embedding dimension [default: 300, or the vector file's dimension].
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Padded document length; 0 means the longest training document.
    #[arg(long, default_value_t = 0)]
    pub max_len: usize,
    #[arg(long, default_value_t = 128)]
    pub filters: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub heights: Vec<usize>,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = LossArg::Mse)]
    pub loss: LossArg,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PrepareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Stop-word file, one token per line; the built-in English list when omitted.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Drop terms absent from more than this fraction of training documents.
    #[arg(long, default_value_t = 0.99)]
    pub max_sparsity: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// One of cnn_fix, cnn_rand, svm, nb, knn, lda.
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    #[serde(flatten)]
    pub bow: BowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub cnn: CnnArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Model written by `train` (model.json or model.cnn).
    #[arg(long)]
    pub model: PathBuf,
    /// Text file with one document per line.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Comma-separated methods [default: all; cnn_fix only with --embeddings].
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub bow: BowArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub cnn: CnnArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VizArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// MatrixMarket DTM to project instead of building one from --data.
    #[arg(long)]
    pub input_dtm: Option<PathBuf>,
    /// One label per line, matching the rows of --input-dtm.
    #[arg(long, requires = "input_dtm")]
    pub labels: Option<PathBuf>,
    /// Stop-word file, one token per line; the built-in English list when omitted.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Drop terms absent from more than this fraction of training documents.
    #[arg(long, default_value_t = 0.99)]
    pub max_sparsity: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TsneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub viz: VizArgs,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
}
