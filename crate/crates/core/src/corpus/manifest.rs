use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{jsonl, PhonemeSequence};
use crate::error::{Error, Result};

/// Metadata for one evaluated utterance. File references are resolved
/// relative to the directory of the manifest that holds the record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub utt_id: String,
    pub system_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonemes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phoneme_path: Option<String>,
    /// Frame-level content features (`.ttsf`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_path: Option<String>,
    /// Content tokens (`.tok`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_path: Option<String>,
    /// Reference contour for F0 baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_f0_path: Option<String>,
    /// Frame-level continuous prosody features (`.ttsf`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prosody_path: Option<String>,
    /// Phoneme-level pooled prosody features (`.ttsf`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_path: Option<String>,
    /// Stage-0 phoneme-level prosody tokens (`.tok`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prosody_token_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cer: Option<f64>,
    /// Additional numeric columns (e.g. `elo`, `f0_rmse`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

impl EvalRecord {
    pub fn new(utt_id: impl Into<String>, system_id: impl Into<String>) -> Self {
        Self {
            utt_id: utt_id.into(),
            system_id: system_id.into(),
            ..Default::default()
        }
    }

    /// Looks up a numeric column: `mos`, `wer`, `cer`, or a `metrics` key.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "mos" => self.mos,
            "wer" => self.wer,
            "cer" => self.cer,
            other => self.metrics.get(other).copied(),
        }
    }
}

/// A parsed manifest together with the directory its paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<EvalRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            records: parse_manifest(path)?,
        })
    }

    pub fn resolve(&self, reference: &str) -> PathBuf {
        let p = Path::new(reference);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolves a required file reference, naming the field when absent.
    pub fn require(&self, record: &EvalRecord, field: &str, value: &Option<String>) -> Result<PathBuf> {
        let reference = value
            .as_deref()
            .ok_or_else(|| Error::validation(format!("{}: missing {field}", record.utt_id)))?;
        let path = self.resolve(reference);
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{field} of {} not found", record.utt_id),
                ),
            ));
        }
        Ok(path)
    }

    /// The record's phonemes, inline or from `phoneme_path`.
    pub fn phonemes(&self, record: &EvalRecord) -> Result<PhonemeSequence> {
        if let Some(symbols) = &record.phonemes {
            return PhonemeSequence::new(symbols.clone());
        }
        let path = self.require(record, "phoneme_path", &record.phoneme_path)?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        PhonemeSequence::parse(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

/// Parses a line-delimited JSON manifest. Records keep file order; empty or
/// duplicate `utt_id`s are rejected with the offending line number.
pub fn parse_manifest(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, record) in jsonl::read::<EvalRecord>(path)? {
        if record.utt_id.is_empty() {
            return Err(Error::line(path, line, "empty utt_id"));
        }
        if record.system_id.is_empty() {
            return Err(Error::line(path, line, "empty system_id"));
        }
        if !seen.insert(record.utt_id.clone()) {
            return Err(Error::line(path, line, format!("duplicate utt_id {}", record.utt_id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.utt_id.as_str())) {
        return Err(Error::validation(format!("duplicate utt_id {}", dup.utt_id)));
    }
    jsonl::write(path, records)
}
