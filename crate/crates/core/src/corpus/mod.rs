//! Data model and on-disk formats for every per-utterance artifact: frame
//! features, token sequences, phoneme sequences, alignments, F0 contours and
//! evaluation manifests.

mod alignment;
mod f0;
mod features;
pub mod jsonl;
mod manifest;
mod phonemes;
mod tokens;

pub use alignment::{read_alignment, validate_segments, write_alignment, AlignmentRecord, AlignmentSegment};
pub use f0::F0Contour;
pub use features::{FeatureMatrix, TTSF_MAGIC, TTSF_VERSION};
pub use manifest::{parse_manifest, write_manifest, EvalRecord, Manifest};
pub use phonemes::{PhonemeInventory, PhonemeSequence, UNK_SYMBOL};
pub use tokens::{read_tokens, read_tokens_for, write_tokens, TokenSequence};

/// Reserved ids shared by every model vocabulary. Data symbols (phonemes,
/// codebook indices) start at [`special::NUM_SPECIAL`].
pub mod special {
    pub const PAD: u32 = 0;
    pub const BOS: u32 = 1;
    pub const EOS: u32 = 2;
    pub const UNK: u32 = 3;
    pub const NUM_SPECIAL: u32 = 4;
}
