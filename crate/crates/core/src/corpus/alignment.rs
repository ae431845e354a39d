use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jsonl;
use crate::error::{Error, Result};

/// Frame span `[start_frame, end_frame)` of one phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AlignmentSegment {
    pub phoneme_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl AlignmentSegment {
    pub fn new(phoneme_index: usize, start_frame: usize, end_frame: usize) -> Self {
        Self {
            phoneme_index,
            start_frame,
            end_frame,
        }
    }

    pub fn len(&self) -> usize {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One line of an alignment `.jsonl` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub utt_id: String,
    pub phoneme_index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Checks that `segments` cover phonemes `0..phoneme_count` exactly once with
/// non-empty, in-range, non-overlapping frame spans, and returns them sorted
/// by phoneme index. Frames between segments (silence) are allowed.
pub fn validate_segments(
    mut segments: Vec<AlignmentSegment>,
    phoneme_count: usize,
    frames: usize,
) -> Result<Vec<AlignmentSegment>> {
    if phoneme_count == 0 {
        return Err(Error::validation("alignment needs at least one phoneme"));
    }
    segments.sort_by_key(|s| (s.phoneme_index, s.start_frame));
    for seg in &segments {
        if seg.start_frame >= seg.end_frame {
            return Err(Error::validation(format!(
                "zero-length segment for phoneme {} at frame {}",
                seg.phoneme_index, seg.start_frame
            )));
        }
        if seg.end_frame > frames {
            return Err(Error::validation(format!(
                "segment for phoneme {} ends at frame {} beyond {frames} frames",
                seg.phoneme_index, seg.end_frame
            )));
        }
    }
    for (expected, seg) in segments.iter().enumerate() {
        if seg.phoneme_index != expected {
            let what = if seg.phoneme_index < expected {
                "duplicate"
            } else {
                "gap in"
            };
            return Err(Error::validation(format!(
                "{what} phoneme coverage at phoneme {expected}"
            )));
        }
    }
    if segments.len() != phoneme_count {
        return Err(Error::validation(format!(
            "gap in phoneme coverage: {} segments for {phoneme_count} phonemes",
            segments.len()
        )));
    }
    for pair in segments.windows(2) {
        if pair[1].start_frame < pair[0].end_frame {
            return Err(Error::validation(format!(
                "overlap between phonemes {} [{}, {}) and {} [{}, {})",
                pair[0].phoneme_index,
                pair[0].start_frame,
                pair[0].end_frame,
                pair[1].phoneme_index,
                pair[1].start_frame,
                pair[1].end_frame
            )));
        }
    }
    Ok(segments)
}

/// Reads the alignment of `utt_id` from a `.jsonl` file (which may hold
/// records for several utterances) and validates it.
pub fn read_alignment(path: &Path, utt_id: &str, phoneme_count: usize, frames: usize) -> Result<Vec<AlignmentSegment>> {
    let segments = jsonl::read::<AlignmentRecord>(path)?
        .into_iter()
        .filter(|(_, r)| r.utt_id == utt_id)
        .map(|(_, r)| AlignmentSegment::new(r.phoneme_index, r.start_frame, r.end_frame))
        .collect();
    validate_segments(segments, phoneme_count, frames).map_err(|e| Error::format(path, format!("{utt_id}: {e}")))
}

pub fn write_alignment(path: &Path, utt_id: &str, segments: &[AlignmentSegment]) -> Result<()> {
    let records: Vec<_> = segments
        .iter()
        .map(|s| AlignmentRecord {
            utt_id: utt_id.to_string(),
            phoneme_index: s.phoneme_index,
            start_frame: s.start_frame,
            end_frame: s.end_frame,
        })
        .collect();
    jsonl::write(path, &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(i: usize, s: usize, e: usize) -> AlignmentSegment {
        AlignmentSegment::new(i, s, e)
    }

    #[test]
    fn single_segment_accepted() {
        assert_eq!(validate_segments(vec![seg(0, 0, 7)], 1, 7).unwrap(), vec![seg(0, 0, 7)]);
    }

    #[test]
    fn adjacent_segments_accepted_and_sorted() {
        let out = validate_segments(vec![seg(1, 5, 10), seg(0, 0, 5)], 2, 10).unwrap();
        assert_eq!(out, vec![seg(0, 0, 5), seg(1, 5, 10)]);
    }

    #[test]
    fn overlap_rejected() {
        let err = validate_segments(vec![seg(0, 0, 5), seg(1, 4, 10)], 2, 10).unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");
    }

    #[test]
    fn coverage_gap_rejected() {
        let err = validate_segments(vec![seg(0, 0, 5), seg(2, 5, 10)], 3, 10).unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
        let err = validate_segments(vec![seg(0, 0, 5)], 2, 10).unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
    }

    #[test]
    fn duplicate_phoneme_rejected() {
        assert!(validate_segments(vec![seg(0, 0, 2), seg(0, 2, 4)], 1, 4).is_err());
    }

    #[test]
    fn zero_length_and_out_of_range_rejected() {
        assert!(validate_segments(vec![seg(0, 3, 3)], 1, 10).is_err());
        assert!(validate_segments(vec![seg(0, 0, 11)], 1, 10).is_err());
    }

    #[test]
    fn file_round_trip_filters_by_utterance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        write_alignment(&path, "u1", &[seg(0, 0, 3), seg(1, 3, 4)]).unwrap();
        let mut other = std::fs::read_to_string(&path).unwrap();
        other.push_str("{\"utt_id\":\"u2\",\"phoneme_index\":0,\"start_frame\":0,\"end_frame\":1}\n");
        std::fs::write(&path, other).unwrap();
        assert_eq!(
            read_alignment(&path, "u1", 2, 4).unwrap(),
            vec![seg(0, 0, 3), seg(1, 3, 4)]
        );
        assert_eq!(read_alignment(&path, "u2", 1, 4).unwrap(), vec![seg(0, 0, 1)]);
    }
}
