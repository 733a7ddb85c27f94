//! Line-based `key = value` configuration files.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {reason}")]
pub struct ConfigError {
    pub line: usize,
    pub reason: String,
}

impl ConfigError {
    pub fn new(line: usize, reason: impl Into<String>) -> Self {
        ConfigError {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a config file into entries. Blank lines and lines starting with
/// `#` are skipped; keys and values are trimmed.
pub fn parse_key_values(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(i + 1, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::new(i + 1, "empty key"));
        }
        out.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}
