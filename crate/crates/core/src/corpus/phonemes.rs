use std::collections::HashMap;
use std::path::Path;

use tracing::warn;

use super::special;
use crate::error::{Error, Result};

pub const UNK_SYMBOL: &str = "<unk>";

/// The conditioning phoneme sequence of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhonemeSequence {
    symbols: Vec<String>,
}

impl PhonemeSequence {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::validation("phoneme sequence must not be empty"));
        }
        if let Some(s) = symbols.iter().find(|s| s.is_empty() || s.contains(char::is_whitespace)) {
            return Err(Error::validation(format!("invalid phoneme symbol {s:?}")));
        }
        Ok(Self { symbols })
    }

    /// Parses whitespace-separated symbols.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// A declared phoneme inventory mapping symbols to model ids. Symbol `i`
/// maps to id `i + NUM_SPECIAL`; unknown symbols map to `UNK`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, u32>,
}

impl PhonemeInventory {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::validation("phoneme inventory must not be empty"));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s == UNK_SYMBOL {
                return Err(Error::validation(format!("{UNK_SYMBOL} is reserved")));
            }
            if index.insert(s.clone(), i as u32 + special::NUM_SPECIAL).is_some() {
                return Err(Error::validation(format!("duplicate phoneme symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// Builds a sorted inventory from every symbol occurring in `sequences`.
    pub fn from_sequences<'a>(sequences: impl IntoIterator<Item = &'a PhonemeSequence>) -> Result<Self> {
        let mut all: Vec<String> = sequences
            .into_iter()
            .flat_map(|s| s.symbols.iter().cloned())
            .filter(|s| s != UNK_SYMBOL)
            .collect();
        all.sort();
        all.dedup();
        Self::new(all)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.split_whitespace().map(str::to_string).collect()).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.symbols.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Model vocabulary size including the reserved specials.
    pub fn vocab_size(&self) -> u32 {
        self.symbols.len() as u32 + special::NUM_SPECIAL
    }

    pub fn id(&self, symbol: &str) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    /// Maps a sequence to model ids. Unknown symbols become `UNK` and are
    /// reported with a warning.
    pub fn encode(&self, phonemes: &PhonemeSequence) -> Vec<u32> {
        let mut unknown = 0usize;
        let ids = phonemes
            .symbols
            .iter()
            .map(|s| {
                self.id(s).unwrap_or_else(|| {
                    unknown += 1;
                    special::UNK
                })
            })
            .collect();
        if unknown > 0 {
            warn!(unknown, "phoneme symbols outside the inventory mapped to {UNK_SYMBOL}");
        }
        ids
    }
}
