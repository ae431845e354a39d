//! Reference-free scores: mean per-token natural-log likelihood of discrete
//! speech tokens under a trained generator.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::{read_tokens_for, EvalRecord, Manifest, PhonemeSequence, TokenSequence};
use crate::error::{Error, Result};
use crate::generator::GeneratorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TtscoreInt,
    TtscorePro,
    UlmScore,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TtscoreInt => "ttscore_int",
            Self::TtscorePro => "ttscore_pro",
            Self::UlmScore => "ulm_score",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "ttscore_int" | "int" => Ok(Self::TtscoreInt),
            "ttscore_pro" | "pro" => Ok(Self::TtscorePro),
            "ulm_score" | "ulm" => Ok(Self::UlmScore),
            _ => Err(Error::Config(format!(
                "unknown metric `{s}` (expected ttscore-int, ttscore-pro or ulm)"
            ))),
        }
    }
}

/// What to do when a prosody token sequence is not one token per phoneme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LengthPolicy {
    #[default]
    Reject,
    Warn,
}

/// Mean log-probability over the scored positions (data tokens plus the
/// end-of-sequence position).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub utt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    pub metric: Metric,
    pub value: f64,
    pub token_count: usize,
}

/// An utterance that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub utt_id: String,
    pub message: String,
}

fn average(logprobs: &[f64]) -> Score {
    Score {
        value: logprobs.iter().sum::<f64>() / logprobs.len() as f64,
        token_count: logprobs.len(),
    }
}

fn require_conditional(model: &GeneratorModel, metric: Metric) -> Result<()> {
    if !model.is_conditional() {
        return Err(Error::validation(format!(
            "{metric} needs a conditional (phoneme-conditioned) model"
        )));
    }
    Ok(())
}

pub fn ttscore_int(model: &GeneratorModel, phonemes: &PhonemeSequence, tokens: &TokenSequence) -> Result<Score> {
    require_conditional(model, Metric::TtscoreInt)?;
    Ok(average(&model.token_logprobs(Some(phonemes), tokens)?))
}

/// Scores phoneme-level prosody tokens; their count must match the phoneme
/// count unless `policy` is [`LengthPolicy::Warn`].
pub fn ttscore_pro(
    model: &GeneratorModel,
    phonemes: &PhonemeSequence,
    tokens: &TokenSequence,
    policy: LengthPolicy,
) -> Result<Score> {
    require_conditional(model, Metric::TtscorePro)?;
    if tokens.len() != phonemes.len() {
        let msg = format!("{} prosody tokens for {} phonemes", tokens.len(), phonemes.len());
        match policy {
            LengthPolicy::Reject => return Err(Error::validation(msg)),
            LengthPolicy::Warn => warn!("{msg}"),
        }
    }
    Ok(average(&model.token_logprobs(Some(phonemes), tokens)?))
}

pub fn ulm_score(model: &GeneratorModel, tokens: &TokenSequence) -> Result<Score> {
    if model.is_conditional() {
        return Err(Error::validation(
            "ulm_score needs an unconditional (decoder-only) model",
        ));
    }
    Ok(average(&model.token_logprobs(None, tokens)?))
}

/// Scores several utterances in one packed pass. Results equal per-item
/// scoring up to floating-point summation order.
pub fn score_batch(model: &GeneratorModel, items: &[(Option<&PhonemeSequence>, &TokenSequence)]) -> Result<Vec<Score>> {
    Ok(model
        .token_logprobs_batch(items)?
        .iter()
        .map(|lp| average(lp))
        .collect())
}

pub fn score_one(
    model: &GeneratorModel,
    metric: Metric,
    phonemes: Option<&PhonemeSequence>,
    tokens: &TokenSequence,
    policy: LengthPolicy,
) -> Result<Score> {
    match (metric, phonemes) {
        (Metric::UlmScore, _) => ulm_score(model, tokens),
        (_, None) => Err(Error::validation(format!("{metric} needs phonemes"))),
        (Metric::TtscoreInt, Some(ph)) => ttscore_int(model, ph, tokens),
        (Metric::TtscorePro, Some(ph)) => ttscore_pro(model, ph, tokens, policy),
    }
}

/// Where [`batch_score`] finds each record's tokens.
#[derive(Debug, Clone, Copy)]
pub enum TokenSource<'a> {
    /// The record's `token_path` (content metrics) or `prosody_token_path`.
    Manifest,
    /// Pre-loaded tokens keyed by utterance id.
    Table(&'a HashMap<String, TokenSequence>),
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub results: Vec<ScoreResult>,
    pub failures: Vec<Failure>,
}

fn record_tokens(
    manifest: &Manifest,
    record: &EvalRecord,
    metric: Metric,
    source: TokenSource<'_>,
    vocab: u32,
) -> Result<TokenSequence> {
    match source {
        TokenSource::Table(table) => table
            .get(&record.utt_id)
            .cloned()
            .ok_or_else(|| Error::validation(format!("no tokens for utterance `{}`", record.utt_id))),
        TokenSource::Manifest => {
            let path = match metric {
                Metric::TtscorePro => manifest.require(record, "prosody_token_path", &record.prosody_token_path)?,
                _ => manifest.require(record, "token_path", &record.token_path)?,
            };
            read_tokens_for(&path, &record.utt_id, vocab)
        }
    }
}

fn score_record(
    model: &GeneratorModel,
    metric: Metric,
    manifest: &Manifest,
    record: &EvalRecord,
    source: TokenSource<'_>,
    policy: LengthPolicy,
) -> Result<ScoreResult> {
    let tokens = record_tokens(manifest, record, metric, source, model.data_vocab() as u32)?;
    let phonemes = match metric {
        Metric::UlmScore => None,
        _ => Some(manifest.phonemes(record)?),
    };
    let s = score_one(model, metric, phonemes.as_ref(), &tokens, policy)?;
    Ok(ScoreResult {
        utt_id: record.utt_id.clone(),
        system_id: Some(record.system_id.clone()),
        metric,
        value: s.value,
        token_count: s.token_count,
    })
}

/// Scores every manifest record with one metric, in manifest order, on the
/// current rayon pool. Each utterance is scored on its own, so results do
/// not depend on the worker count. Records that fail are reported in
/// `failures` and skipped; numeric failures abort the run.
pub fn batch_score(
    model: &GeneratorModel,
    metric: Metric,
    manifest: &Manifest,
    source: TokenSource<'_>,
    policy: LengthPolicy,
) -> Result<BatchOutcome> {
    match metric {
        Metric::UlmScore if model.is_conditional() => {
            return Err(Error::validation("ulm scoring needs an unconditional model"));
        }
        Metric::TtscoreInt | Metric::TtscorePro if !model.is_conditional() => {
            return Err(Error::validation(format!("{metric} needs a conditional model")));
        }
        _ => {}
    }
    let scored: Vec<Result<ScoreResult>> = manifest
        .records
        .par_iter()
        .map(|r| score_record(model, metric, manifest, r, source, policy))
        .collect();
    let mut out = BatchOutcome::default();
    for (record, r) in manifest.records.iter().zip(scored) {
        match r {
            Ok(res) => out.results.push(res),
            Err(e @ Error::Numeric(_)) => return Err(e),
            Err(e) => {
                warn!(utt_id = %record.utt_id, "skipping: {e}");
                out.failures.push(Failure {
                    utt_id: record.utt_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}
