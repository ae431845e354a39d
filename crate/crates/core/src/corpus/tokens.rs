use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Discrete token ids for one utterance, all below `vocab_size`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    ids: Vec<u32>,
    vocab_size: u32,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>, vocab_size: u32) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::validation("token sequence must not be empty"));
        }
        if let Some((pos, id)) = ids.iter().enumerate().find(|(_, &id)| id >= vocab_size) {
            return Err(Error::validation(format!(
                "token id {id} at position {pos} is outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(Self { ids, vocab_size })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Writes a `.tok` file: one `utt_id<TAB>id id id` line per utterance.
pub fn write_tokens(path: &Path, entries: &[(String, TokenSequence)]) -> Result<()> {
    let mut out = String::new();
    for (utt_id, seq) in entries {
        if utt_id.is_empty() || utt_id.contains(['\t', '\n']) {
            return Err(Error::validation(format!("invalid utterance id {utt_id:?}")));
        }
        out.push_str(utt_id);
        out.push('\t');
        for (i, id) in seq.ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{id}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads every line of a `.tok` file, validating ids against `vocab_size`.
pub fn read_tokens(path: &Path, vocab_size: u32) -> Result<Vec<(String, TokenSequence)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (utt_id, ids) = line
            .split_once('\t')
            .ok_or_else(|| Error::line(path, idx + 1, "expected `utt_id<TAB>ids`"))?;
        let ids = ids
            .split_whitespace()
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::line(path, idx + 1, format!("bad token id: {e}")))?;
        let seq = TokenSequence::new(ids, vocab_size).map_err(|e| Error::line(path, idx + 1, e.to_string()))?;
        out.push((utt_id.to_string(), seq));
    }
    Ok(out)
}

/// Reads the sequence for `utt_id` from a `.tok` file.
pub fn read_tokens_for(path: &Path, utt_id: &str, vocab_size: u32) -> Result<TokenSequence> {
    read_tokens(path, vocab_size)?
        .into_iter()
        .find(|(id, _)| id == utt_id)
        .map(|(_, seq)| seq)
        .ok_or_else(|| Error::format(path, format!("no tokens for utterance {utt_id}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(ids: Vec<u32>, vocab: u32) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tok");
        let seq = TokenSequence::new(ids, vocab).unwrap();
        write_tokens(&path, &[("utt".into(), seq.clone())]).unwrap();
        assert_eq!(read_tokens_for(&path, "utt", vocab).unwrap(), seq);
    }

    #[test]
    fn single_id_round_trips() {
        round_trip(vec![0], 1);
    }

    #[test]
    fn pi_digits_round_trip() {
        round_trip(vec![3, 1, 4, 1, 5], 6);
    }

    #[test]
    fn id_outside_vocab_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.tok");
        std::fs::write(&path, "u1\t0 1 6\n").unwrap();
        let err = read_tokens(&path, 6).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn rejects_empty_sequence() {
        assert!(TokenSequence::new(vec![], 4).is_err());
    }
}
