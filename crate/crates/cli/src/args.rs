use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Reference-free speech evaluation from discrete token likelihoods.
///
/// Options may also come from a TOML file (`--config`; top-level keys apply
/// to every command, a `[command-name]` table to one command) or from
/// `TTSCORE_<OPTION>` environment variables. Command-line flags win over the
/// file, which wins over the environment.
#[derive(Debug, Parser)]
#[command(name = "ttscore", version, propagate_version = true)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every random choice made by the command [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for per-utterance processing [default: 1].
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

// parsed once per process, so variant size does not matter
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a k-means codebook on frame features.
    FitKmeans(FitKmeansArgs),
    /// Map frame features to content tokens with a k-means codebook.
    Tokenize(TokenizeArgs),
    /// Pool frame features to one vector per aligned phoneme.
    Pool(PoolArgs),
    /// Fit a residual vector quantizer on pooled features.
    FitRvq(FitRvqArgs),
    /// Encode pooled features into per-stage prosody tokens.
    EncodeRvq(EncodeRvqArgs),
    /// Train a token generator (phoneme-conditioned or unconditional).
    TrainGen(TrainGenArgs),
    /// Score utterances with a trained generator.
    Score(ScoreArgs),
    /// Word or character error rate of ASR hypotheses.
    Wer(WerArgs),
    /// F0 RMSE and correlation against reference contours.
    F0Metrics(F0MetricsArgs),
    /// Write inverted or time-flipped F0 contours.
    PerturbF0(PerturbF0Args),
    /// Correlate metric columns at utterance and system level.
    Correlate(CorrelateArgs),
    /// Summarize score distributions per group.
    Distributions(DistributionsArgs),
    /// Generate the seeded synthetic corpus.
    SynthCorpus(SynthCorpusArgs),
}

#[derive(Debug, Args)]
pub struct FitKmeansArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of centroids.
    #[arg(long)]
    pub k: Option<usize>,
    /// Output codebook (`.json`, with a sibling `.ttsf`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Which manifest features to cluster: `feature` or `prosody` [default: feature].
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Cluster a seeded random subset of at most this many frames.
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Output token file (`utt_id<TAB>ids` per line).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `feature` or `prosody` [default: feature].
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory receiving `<utt_id>.ttsf` per utterance.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// `mean` or `max` [default: mean].
    #[arg(long)]
    pub mode: Option<String>,
    /// `prosody` or `feature` [default: prosody].
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitRvqArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Pooled features written by `pool`; defaults to each record's `pooled_path`.
    #[arg(long)]
    pub pooled_dir: Option<PathBuf>,
    /// Quantizer stages [default: 2].
    #[arg(long)]
    pub stages: Option<usize>,
    /// Centroids per stage [default: 32].
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EncodeRvqArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub pooled_dir: Option<PathBuf>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Output base path; stage `s` goes to `<out>.s<s>.tok`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainGenArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `content`, `prosody` or `ulm` [default: content].
    #[arg(long)]
    pub kind: Option<String>,
    /// Token file; defaults to each record's token_path (prosody: prosody_token_path).
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Token vocabulary size (alternatively `--codebook`).
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Codebook the tokens came from; sets the vocabulary size.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Phoneme inventory (one symbol per line); defaults to the manifest's symbols.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `toy` or `full` [default: toy].
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub enc_layers: Option<usize>,
    #[arg(long)]
    pub dec_layers: Option<usize>,
    #[arg(long)]
    pub model_dim: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ffn_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup_fraction: Option<f64>,
    /// Global gradient-norm clip; 0 disables it [default: 1.0].
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// `single` or `double` [default: single].
    #[arg(long)]
    pub precision: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `ttscore-int`, `ttscore-pro` or `ulm`.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Results file (one JSON record per line).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prosody token count differing from the phoneme count: `reject` or `warn` [default: reject].
    #[arg(long)]
    pub length_policy: Option<String>,
}

#[derive(Debug, Args)]
pub struct WerArgs {
    /// Manifest whose `text` fields are the references.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Hypotheses, one `{"utt_id", "text"}` record per line.
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `word` or `char` [default: word].
    #[arg(long)]
    pub unit: Option<String>,
    /// Lowercase and strip punctuation before comparing [default: true].
    #[arg(long)]
    pub normalize: Option<bool>,
}

#[derive(Debug, Args)]
pub struct F0MetricsArgs {
    /// Records need `f0_path` and `ref_f0_path`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbF0Args {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `inverse` or `flip`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Directory receiving `<utt_id>.ttsf` per utterance.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Results files to join with the manifest columns.
    #[arg(long, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Metric pairs `a:b`, e.g. `ttscore_int:mos`.
    #[arg(long = "pair", num_args = 1..)]
    pub pairs: Vec<String>,
    /// `utterance`, `system` or both, comma separated [default: utterance,system].
    #[arg(long)]
    pub levels: Option<String>,
    /// Report file (one JSON record per pair and level).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a plain-text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistributionsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Metric column to summarize.
    #[arg(long)]
    pub metric: Option<String>,
    /// Histogram bins [default: 20].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Group pairs `a:b` to compare; default all pairs.
    #[arg(long = "compare", num_args = 1..)]
    pub compare: Vec<String>,
    /// Report file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCorpusArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train_utts: Option<usize>,
    #[arg(long)]
    pub eval_texts: Option<usize>,
    #[arg(long)]
    pub systems: Option<usize>,
    #[arg(long)]
    pub perturb_utts: Option<usize>,
    #[arg(long)]
    pub feature_dims: Option<usize>,
}
