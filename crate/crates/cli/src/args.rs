use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use hyperprobe::probes::{Activation, Geometry, Task};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "hyperprobe", version, about = "Train and evaluate Poincaré and Euclidean structural probes")]
pub struct Cli {
    /// Worker threads for per-sentence loss and metric evaluation
    /// (default: available parallelism).
    #[arg(long, global = true, help_heading = "Global options", env = "HYPERPROBE_THREADS")]
    pub threads: Option<usize>,
    /// TOML file with defaults for any training or evaluation option.
    #[arg(long, global = true, help_heading = "Global options")]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, help_heading = "Global options", action = ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true, help_heading = "Global options", conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the bundled synthetic syntax and sentiment corpora.
    Synth(SynthArgs),
    /// Train a distance, depth or joint probe on a treebank.
    TrainSyntax(TrainSyntaxArgs),
    /// Train a sentiment probe on a labelled sentence file.
    TrainSentiment(TrainSentimentArgs),
    /// Score a checkpoint on a corpus.
    Eval(EvalArgs),
    /// Train and evaluate once per grid value along one axis.
    Sweep(SweepArgs),
    /// Finite-difference check of every loss variant.
    Gradcheck(GradcheckArgs),
    /// Draw one sentence of a corpus as projected by a checkpoint.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training sentences in the syntax corpus.
    #[arg(long, default_value_t = 200)]
    pub sentences: usize,
    #[arg(long, default_value_t = 40)]
    pub dev_sentences: usize,
    #[arg(long, default_value_t = 320)]
    pub sentiment_sentences: usize,
    #[arg(long, default_value_t = 80)]
    pub sentiment_dev_sentences: usize,
}

/// Options shared by every training command. Unset options fall back to the
/// config file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub geometry: Option<Geometry>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub curvature: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning-rate multiplier applied when dev loss stops improving.
    #[arg(long)]
    pub decay: Option<f64>,
    /// Epochs without dev improvement before decaying.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Apply the Möbius matrix Q after the exponential map.
    #[arg(long)]
    pub use_q: bool,
    /// Euclidean second layer behind this activation.
    #[arg(long)]
    pub nonlinearity: Option<Activation>,
    /// Drop sentences longer than this many tokens.
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainSyntaxArgs {
    #[arg(long)]
    pub treebank: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub dev_treebank: PathBuf,
    #[arg(long)]
    pub dev_emb: PathBuf,
    #[arg(long, value_parser = syntax_task)]
    pub task: Option<Task>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainSentimentArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub dev_labels: PathBuf,
    #[arg(long)]
    pub dev_emb: PathBuf,
    /// Keep the meta-embeddings at their initial positions.
    #[arg(long)]
    pub fixed_heads: bool,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

/// A treebank or a sentiment file, each paired with an embedding file.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false, id = "corpus")]
pub struct CorpusFlags {
    #[arg(long)]
    pub treebank: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusFlags,
    #[arg(long)]
    pub emb: PathBuf,
    /// Keep punctuation tokens in every metric.
    #[arg(long)]
    pub include_punct: bool,
    /// Average UUAS per sentence instead of per edge.
    #[arg(long)]
    pub macro_uuas: bool,
    /// Layer the embeddings came from, echoed into the report.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Layer,
    Rank,
    Curvature,
    SentenceLength,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, value_delimiter = ',')]
    pub ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub curvatures: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Upper length limits; each point scores the dev sentences longer than
    /// the previous limit and at most this long.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    #[arg(long)]
    pub treebank: Option<PathBuf>,
    #[arg(long)]
    pub dev_treebank: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub dev_labels: Option<PathBuf>,
    #[arg(long)]
    pub emb: Option<PathBuf>,
    #[arg(long)]
    pub dev_emb: Option<PathBuf>,
    /// Embedding path with `{layer}` in it, for layer sweeps.
    #[arg(long)]
    pub emb_template: Option<String>,
    #[arg(long)]
    pub dev_emb_template: Option<String>,
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub fixed_heads: bool,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub include_punct: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = hyperprobe::gradcheck::DEFAULT_TOL)]
    pub tol: f64,
    /// Directory for the result table and manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perturb every analytic gradient (tests the gate itself).
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusFlags,
    #[arg(long)]
    pub emb: PathBuf,
    /// 0-based sentence index in file order.
    #[arg(long, default_value_t = 0)]
    pub sentence: usize,
    /// Dashed-connector threshold as a fraction of d(c_pos, c_neg).
    #[arg(long, default_value_t = hyperprobe::viz::DEFAULT_SIGNIFICANCE)]
    pub significance: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn syntax_task(s: &str) -> Result<Task, String> {
    match s.parse::<Task>()? {
        Task::Sentiment => Err("use train-sentiment for the sentiment task".into()),
        t => Ok(t),
    }
}
