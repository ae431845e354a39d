use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use ttscore::corpus::{jsonl, read_tokens, EvalRecord, FeatureMatrix, Manifest, TokenSequence};

use crate::args::Command;
use crate::config::Resolver;
use crate::error::{io_error, CliError, CliResult};
use crate::run::{run_path, RunRecord};

mod analysis;
mod metrics;
mod prosody;
mod quantize;
mod score;
mod synth;
mod train;

pub struct Ctx {
    pub command: &'static str,
    pub seed: u64,
    pub workers: usize,
    pub resolver: Resolver,
}

impl Ctx {
    pub fn record(&mut self) -> RunRecord {
        RunRecord::new(self.command, self.seed, self.workers, self.resolver.take_resolved())
    }

    /// Resolves and loads the `--manifest` option.
    pub fn manifest(&mut self, cli: Option<PathBuf>) -> CliResult<(PathBuf, Manifest)> {
        let path: PathBuf = self.resolver.required("manifest", cli)?;
        let manifest = Manifest::load(&path)?;
        Ok((path, manifest))
    }
}

pub fn name(command: &Command) -> &'static str {
    match command {
        Command::FitKmeans(_) => "fit-kmeans",
        Command::Tokenize(_) => "tokenize",
        Command::Pool(_) => "pool",
        Command::FitRvq(_) => "fit-rvq",
        Command::EncodeRvq(_) => "encode-rvq",
        Command::TrainGen(_) => "train-gen",
        Command::Score(_) => "score",
        Command::Wer(_) => "wer",
        Command::F0Metrics(_) => "f0-metrics",
        Command::PerturbF0(_) => "perturb-f0",
        Command::Correlate(_) => "correlate",
        Command::Distributions(_) => "distributions",
        Command::SynthCorpus(_) => "synth-corpus",
    }
}

pub fn dispatch(command: Command, ctx: &mut Ctx) -> CliResult<()> {
    match command {
        Command::FitKmeans(a) => quantize::fit_kmeans(a, ctx),
        Command::Tokenize(a) => quantize::tokenize(a, ctx),
        Command::Pool(a) => prosody::pool(a, ctx),
        Command::FitRvq(a) => prosody::fit_rvq(a, ctx),
        Command::EncodeRvq(a) => prosody::encode_rvq(a, ctx),
        Command::PerturbF0(a) => prosody::perturb_f0(a, ctx),
        Command::TrainGen(a) => train::train_gen(a, ctx),
        Command::Score(a) => score::score(a, ctx),
        Command::Wer(a) => metrics::wer(a, ctx),
        Command::F0Metrics(a) => metrics::f0_metrics(a, ctx),
        Command::Correlate(a) => analysis::correlate(a, ctx),
        Command::Distributions(a) => analysis::distributions(a, ctx),
        Command::SynthCorpus(a) => synth::synth_corpus(a, ctx),
    }
}

/// Frame features of a record: `feature` (content) or `prosody`.
pub fn frame_features(manifest: &Manifest, record: &EvalRecord, field: &str) -> CliResult<FeatureMatrix> {
    let path = match field {
        "feature" => manifest.require(record, "feature_path", &record.feature_path)?,
        "prosody" => manifest.require(record, "prosody_path", &record.prosody_path)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown feature field `{other}` (feature or prosody)"
            )))
        }
    };
    Ok(FeatureMatrix::read(&path)?)
}

/// Reads per-record features in parallel, keeping manifest order.
pub fn read_all<T, F>(manifest: &Manifest, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(&EvalRecord) -> CliResult<T> + Sync + Send,
{
    manifest.records.par_iter().map(f).collect()
}

/// Pooled features from `<dir>/<utt_id>.ttsf` or the record's `pooled_path`.
pub fn pooled_features(manifest: &Manifest, record: &EvalRecord, dir: Option<&Path>) -> CliResult<FeatureMatrix> {
    let path = match dir {
        Some(d) => d.join(format!("{}.ttsf", record.utt_id)),
        None => manifest.require(record, "pooled_path", &record.pooled_path)?,
    };
    Ok(FeatureMatrix::read(&path)?)
}

pub fn token_table(path: &Path, vocab: u32) -> CliResult<HashMap<String, TokenSequence>> {
    Ok(read_tokens(path, vocab)?.into_iter().collect())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn write_records<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    Ok(jsonl::write(path, items)?)
}

pub fn finish(record: &RunRecord, artifact: &Path) -> CliResult<()> {
    record.write(&run_path(artifact))
}
