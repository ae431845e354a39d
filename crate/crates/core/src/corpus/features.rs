use std::path::Path;

use crate::error::{Error, Result};

pub const TTSF_MAGIC: &[u8; 4] = b"TTSF";
pub const TTSF_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Frame-level continuous features: `frames` rows of `dims` values, stored
/// frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dims: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dims: usize, values: Vec<f32>) -> Result<Self> {
        if frames == 0 || dims == 0 {
            return Err(Error::validation(format!(
                "feature matrix must be non-empty, got {frames}x{dims}"
            )));
        }
        if values.len() != frames * dims {
            return Err(Error::validation(format!(
                "feature matrix {frames}x{dims} needs {} values, got {}",
                frames * dims,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite feature value at frame {}, dim {}",
                pos / dims,
                pos % dims
            )));
        }
        Ok(Self { frames, dims, values })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * dims);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dims {
                return Err(Error::validation(format!(
                    "row {i} has {} dims, expected {dims}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dims, values)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.values.chunks_exact(self.dims)
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Serializes to the `.ttsf` layout: magic, version, frames, dims (all
    /// `u32` little-endian) followed by the row-major `f32` payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(TTSF_MAGIC);
        out.extend_from_slice(&TTSF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(path, "truncated header"));
        }
        if &bytes[0..4] != TTSF_MAGIC {
            return Err(Error::format(path, "bad magic, not a TTSF feature file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != TTSF_VERSION {
            return Err(Error::format(path, format!("unsupported TTSF version {version}")));
        }
        let frames = word(8) as usize;
        let dims = word(12) as usize;
        let expected = frames
            .checked_mul(dims)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < expected {
            return Err(Error::format(
                path,
                format!("truncated payload: {} of {expected} bytes", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(Error::format(path, "trailing bytes after payload"));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(frames, dims, values).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_zero_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ttsf");
        let m = FeatureMatrix::new(1, 1, vec![0.0]).unwrap();
        m.write(&path).unwrap();
        assert_eq!(FeatureMatrix::read(&path).unwrap(), m);
    }

    #[test]
    fn bytes_match_hand_built_layout() {
        let values: Vec<f32> = (0..12).map(|i| (i as f32) * 0.37 - 1.5).collect();
        let m = FeatureMatrix::new(3, 4, values.clone()).unwrap();
        let mut expected = b"TTSF".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0]);
        for v in values {
            expected.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        assert_eq!(m.to_bytes(), expected);
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = FeatureMatrix::new(1, 1, vec![1.0]).unwrap().to_bytes();
        bytes[0] = b'X';
        let err = FeatureMatrix::from_bytes(&bytes, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn rejects_truncated_payload() {
        let bytes = FeatureMatrix::new(2, 2, vec![1.0; 4]).unwrap().to_bytes();
        let err = FeatureMatrix::from_bytes(&bytes[..bytes.len() - 1], Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_non_finite_on_read() {
        let mut bytes = FeatureMatrix::new(1, 2, vec![1.0, 2.0]).unwrap().to_bytes();
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(FeatureMatrix::from_bytes(&bytes, Path::new("x")).is_err());
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(FeatureMatrix::new(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
