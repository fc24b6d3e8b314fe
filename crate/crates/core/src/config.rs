//! Flat `key = value` configuration files.
//!
//! Files are TOML restricted to top-level scalars. Every value is handed to
//! [`KeyValueConfig::set`] as a string, the same path command-line overrides
//! take, so a key behaves identically wherever it comes from.

use std::path::Path;

use crate::error::{Error, Result};

pub trait KeyValueConfig {
    /// Keys accepted by [`KeyValueConfig::set`].
    const KEYS: &'static [&'static str];

    fn set(&mut self, key: &str, value: &str) -> Result<()>;

    fn validate(&self) -> Result<()>;

    fn apply_str(&mut self, text: &str, source_name: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(source_name, line, e.message().to_string())
        })?;
        for (key, value) in &table {
            let value = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(Error::Config(format!(
                        "{source_name}: key {key:?} must be a scalar, got {}",
                        other.type_str()
                    )))
                }
            };
            self.set(key, &value)?;
        }
        Ok(())
    }

    fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, &path.display().to_string())
    }

    /// Applies `key=value` strings, e.g. from repeated command-line flags.
    fn apply_overrides<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {pair:?}")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

pub(crate) fn unknown_key(key: &str, known: &[&str]) -> Error {
    Error::Config(format!("unknown key {key:?} (expected one of: {})", known.join(", ")))
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}
