use std::path::Path;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Per-frame fundamental frequency in Hz. A value of exactly `0.0` marks an
/// unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    values: Vec<f64>,
}

impl F0Contour {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(format!("invalid F0 value {v} at frame {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_voiced(&self, frame: usize) -> bool {
        self.values[frame] > 0.0
    }

    pub fn voiced_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    /// Mean over voiced frames, `None` when fully unvoiced.
    pub fn voiced_mean(&self) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .filter(|v| **v > 0.0)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// F0 files are single-column `.ttsf` matrices.
    pub fn read(path: &Path) -> Result<Self> {
        let m = FeatureMatrix::read(path)?;
        if m.dims() != 1 {
            return Err(Error::format(
                path,
                format!("F0 file must have 1 column, found {}", m.dims()),
            ));
        }
        Self::new(m.values().iter().map(|&v| v as f64).collect()).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let values = self.values.iter().map(|&v| v as f32).collect();
        FeatureMatrix::new(self.values.len(), 1, values)?.write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(F0Contour::new(vec![100.0, -1.0]).is_err());
        assert!(F0Contour::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn voiced_mean_ignores_unvoiced() {
        let c = F0Contour::new(vec![0.0, 100.0, 0.0, 200.0]).unwrap();
        assert_eq!(c.voiced_mean(), Some(150.0));
        assert_eq!(F0Contour::new(vec![0.0]).unwrap().voiced_mean(), None);
    }
}
