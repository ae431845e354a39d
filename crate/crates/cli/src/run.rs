use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliResult};

#[derive(Debug, Serialize)]
struct InputDigest {
    path: PathBuf,
    sha256: String,
}

/// Reproducibility record written next to every artifact.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    tool: &'static str,
    version: &'static str,
    command: String,
    seed: u64,
    workers: usize,
    config: BTreeMap<String, Value>,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    summary: BTreeMap<String, Value>,
}

impl RunRecord {
    pub fn new(command: &str, seed: u64, workers: usize, config: BTreeMap<String, Value>) -> Self {
        Self {
            tool: "ttscore",
            version: ttscore::VERSION,
            command: command.to_string(),
            seed,
            workers,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let mut file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = file.read(&mut buf).map_err(|e| io_error(path, e))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Writes the record to `path`.
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("run record serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| io_error(path, e))
    }
}

/// `<artifact>.run.json`
pub fn run_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    artifact.with_file_name(name)
}
