//! Checkpoint layout: `TTSG` magic, `u32` format version, `u32` header
//! length, a JSON header (config, step count, precision, phoneme inventory,
//! tensor inventory), then every tensor row-major in header order as
//! little-endian `f32` (single precision) or `f64` (double precision).

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::GeneratorModel;
use super::{GeneratorConfig, Precision};
use crate::corpus::PhonemeInventory;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TTSG";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: GeneratorConfig,
    trained_steps: u64,
    precision: Precision,
    #[serde(default)]
    inventory: Option<Vec<String>>,
    tensors: Vec<TensorEntry>,
}

impl GeneratorModel {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config().clone(),
            trained_steps: self.trained_steps,
            precision: self.precision,
            inventory: self.inventory().map(|i| i.symbols().to_vec()),
            tensors: self
                .params()
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: [t.nrows(), t.ncols()],
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("serializable header");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.params() {
            for &v in t.iter() {
                match self.precision {
                    Precision::Single => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    Precision::Double => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |m: String| Error::format(path, m);
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(fail("not a generator checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(fail(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header_bytes = bytes
            .get(12..12 + header_len)
            .ok_or_else(|| fail("truncated header".into()))?;
        let header: Header = serde_json::from_slice(header_bytes).map_err(|e| fail(format!("bad header: {e}")))?;

        let width = match header.precision {
            Precision::Single => 4,
            Precision::Double => 8,
        };
        let mut offset = 12 + header_len;
        let mut named = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let [rows, cols] = entry.shape;
            let len = rows * cols * width;
            let chunk = bytes
                .get(offset..offset + len)
                .ok_or_else(|| fail(format!("truncated payload in tensor {}", entry.name)))?;
            offset += len;
            let values: Vec<f64> = match header.precision {
                Precision::Single => chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
                Precision::Double => chunk
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            };
            let tensor = Array2::from_shape_vec((rows, cols), values).expect("length matches shape");
            named.push((entry.name.clone(), tensor));
        }
        if offset != bytes.len() {
            return Err(fail("trailing bytes after payload".into()));
        }
        let inventory = header
            .inventory
            .map(PhonemeInventory::new)
            .transpose()
            .map_err(|e| fail(e.to_string()))?;
        GeneratorModel::from_parts(header.config, inventory, named, header.precision, header.trained_steps)
            .map_err(|e| fail(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes, path)
    }
}
