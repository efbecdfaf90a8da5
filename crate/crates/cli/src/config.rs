//! Flat `key = value` configuration files.
//!
//! Keys are the long flag names of `run` without the leading dashes. List keys
//! (`snr-db`, `variant`, `emit`) accept comma-separated values and may repeat;
//! `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const KEYS: [&str; 12] = [
    "n",
    "alpha",
    "snr-db",
    "r-sc",
    "variant",
    "trials",
    "max-iters",
    "seed",
    "out",
    "emit",
    "workers",
    "early-stop-tol",
];

const LIST_KEYS: [&str; 3] = ["snr-db", "variant", "emit"];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key '{key}'", lineno + 1);
            }
            let entry = values.entry(key.to_string()).or_default();
            if LIST_KEYS.contains(&key) {
                entry.extend(value.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()));
            } else {
                if !entry.is_empty() {
                    bail!("line {}: key '{key}' given twice", lineno + 1);
                }
                entry.push(value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    pub fn scalar<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key).and_then(|v| v.first()) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key '{key}': invalid value '{raw}': {e}")),
        }
    }

    pub fn list(&self, key: &str) -> &[String] {
        self.values.get(key).map_or(&[], Vec::as_slice)
    }
}
