use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::error::{io_error, CliError, CliResult};

pub const ENV_PREFIX: &str = "TTSCORE_";

/// Resolves each option from the command line, then the config file, then
/// `TTSCORE_*` environment variables, then its default, and remembers the
/// resolved values for the run manifest.
pub struct Resolver {
    file: toml::Table,
    resolved: BTreeMap<String, Value>,
}

fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('-', "_").to_uppercase())
}

fn scalar_text(key: &str, v: &toml::Value) -> CliResult<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(CliError::Usage(format!(
            "config key `{key}` must be a scalar, found {}",
            other.type_str()
        ))),
    }
}

impl Resolver {
    /// Loads `config` (or `$TTSCORE_CONFIG`) and keeps the top-level keys
    /// overlaid with the `[command]` table.
    pub fn new(command: &str, config: Option<&Path>) -> CliResult<Self> {
        let env_path = std::env::var_os(env_name("config")).map(std::path::PathBuf::from);
        let mut file = toml::Table::new();
        if let Some(path) = config.map(Path::to_path_buf).or(env_path) {
            let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            let table: toml::Table = text
                .parse()
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (k, v) in &table {
                if !v.is_table() {
                    file.insert(k.replace('_', "-"), v.clone());
                }
            }
            if let Some(toml::Value::Table(section)) = table.get(command) {
                for (k, v) in section {
                    file.insert(k.replace('_', "-"), v.clone());
                }
            }
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn fallback(&self, key: &str) -> CliResult<Option<(String, String)>> {
        if let Some(v) = self.file.get(key) {
            return Ok(Some((scalar_text(key, v)?, "config file".into())));
        }
        let name = env_name(key);
        Ok(std::env::var(&name).ok().map(|v| (v, name)))
    }

    pub fn optional<T>(&mut self, key: &str, cli: Option<T>) -> CliResult<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let value =
            match cli {
                Some(v) => Some(v),
                None => match self.fallback(key)? {
                    Some((text, source)) => Some(text.parse().map_err(|e| {
                        CliError::Usage(format!("invalid value `{text}` for `{key}` from {source}: {e}"))
                    })?),
                    None => None,
                },
            };
        if let Some(v) = &value {
            self.resolved
                .insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        }
        Ok(value)
    }

    pub fn or<T>(&mut self, key: &str, cli: Option<T>, default: T) -> CliResult<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        match self.optional(key, cli)? {
            Some(v) => Ok(v),
            None => {
                self.resolved
                    .insert(key.to_string(), serde_json::to_value(&default).unwrap_or(Value::Null));
                Ok(default)
            }
        }
    }

    pub fn required<T>(&mut self, key: &str, cli: Option<T>) -> CliResult<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.optional(key, cli)?.ok_or_else(|| {
            CliError::Usage(format!(
                "missing --{key} (or `{key}` in the config file, or {})",
                env_name(key)
            ))
        })
    }

    /// List option: command line values, else a config array, else a
    /// comma-separated environment variable.
    pub fn list(&mut self, key: &str, cli: Vec<String>) -> CliResult<Vec<String>> {
        let values = if !cli.is_empty() {
            cli
        } else if let Some(v) = self.file.get(key) {
            match v {
                toml::Value::Array(items) => items.iter().map(|i| scalar_text(key, i)).collect::<CliResult<_>>()?,
                other => vec![scalar_text(key, other)?],
            }
        } else if let Ok(v) = std::env::var(env_name(key)) {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        } else {
            Vec::new()
        };
        self.resolved
            .insert(key.to_string(), serde_json::to_value(&values).unwrap_or(Value::Null));
        Ok(values)
    }

    /// Hands over the values resolved so far.
    pub fn take_resolved(&mut self) -> BTreeMap<String, Value> {
        std::mem::take(&mut self.resolved)
    }
}

/// Splits `a:b` into its two names.
pub fn parse_pair(text: &str) -> CliResult<(String, String)> {
    match text.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(CliError::Usage(format!("expected `a:b`, got `{text}`"))),
    }
}
