//! Flat `key = value` configuration files.
//!
//! One setting per line; `#` starts a comment. Keys that take lists may be
//! repeated and their values accumulate, so
//!
//! ```text
//! r = 1
//! r = 2:1:4
//! lambda = 0.1:0.1:1.0
//! ```
//!
//! sweeps R over 1..4. Command-line flags replace a key's file values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "n",
    "t",
    "r",
    "eps",
    "mu",
    "lambda",
    "u",
    "profile",
    "cycle_s",
    "message_s",
    "perception",
    "query",
    "metric",
    "solver",
    "tolerance",
    "max_iterations",
    "max_states",
    "samples",
    "max_steps",
    "output",
];

/// Values that repeat only by accumulating; everything else is scalar.
const REPEATABLE: &[&str] = &["n", "t", "r", "eps", "mu", "lambda", "u", "query", "metric"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, Vec<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", lineno + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", lineno + 1);
            }
            if value.is_empty() {
                bail!("line {}: `{key}` has no value", lineno + 1);
            }
            let slot = values.entry(key.to_string()).or_default();
            if !slot.is_empty() && !REPEATABLE.contains(&key) {
                bail!("line {}: `{key}` may only be given once", lineno + 1);
            }
            slot.push(value.to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn get(&self, key: &str) -> &[String] {
        self.values.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn scalar(&self, key: &str) -> Option<&str> {
        self.get(key).first().map(String::as_str)
    }

    /// Flag values when any were given, otherwise the file's.
    pub fn merged<'a>(&'a self, key: &str, flags: &'a [String]) -> &'a [String] {
        if flags.is_empty() {
            self.get(key)
        } else {
            flags
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeatable_keys_accumulate() {
        let c = ConfigFile::parse("# sweep\nr = 1\nr = 2:1:4  # more\n\nprofile=micaz\n").unwrap();
        assert_eq!(c.get("r"), ["1", "2:1:4"]);
        assert_eq!(c.scalar("profile"), Some("micaz"));
        assert!(c.get("n").is_empty());
        let flags = vec!["3".to_string()];
        assert_eq!(c.merged("r", &flags), ["3"]);
        assert_eq!(c.merged("r", &[]), ["1", "2:1:4"]);
    }

    #[test]
    fn malformed_files() {
        assert!(ConfigFile::parse("r 1").is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("profile = a\nprofile = b").is_err());
        assert!(ConfigFile::parse("n =").is_err());
    }
}
