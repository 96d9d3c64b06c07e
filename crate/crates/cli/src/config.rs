//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use the long
//! flag names; `-` and `_` are interchangeable. A flag given on the command
//! line always wins over the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "data",
    "alpha",
    "v_th",
    "steps",
    "lr",
    "weight_decay",
    "batch_size",
    "epochs",
    "hidden",
    "max_rate",
    "mask",
    "limit",
    "test_limit",
    "checkpoint",
    "split",
    "ae",
    "images",
    "audio_train",
    "audio_test",
    "mode",
    "hidden_steps",
    "train_per_class",
    "test_per_class",
    "channels",
    "frames",
    "audiocoder",
    "audio",
    "class",
    "count",
    "param",
    "values",
    "classes",
    "per_class",
    "output",
];

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected key = value",
                    n + 1
                )));
            };
            let key = normalize(k);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key {key:?}",
                    n + 1
                )));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("config key {key} = {raw:?}: {e}"))),
        }
    }

    /// Flag value, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.maybe(key, flag)?.unwrap_or(default))
    }

    pub fn maybe<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parsed(key),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(
        &self,
        key: &str,
        flag: Option<&str>,
        default: &str,
    ) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = match flag {
            Some(s) => s.to_string(),
            None => self
                .values
                .get(key)
                .cloned()
                .unwrap_or_else(|| default.to_string()),
        };
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CliError::Config(format!("{key} entry {s:?}: {e}")))
            })
            .collect()
    }
}
