//! Flat `key = value` config files merged under command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use comma_core::fingerprint::fingerprint;

use crate::error::{CliError, CliResult};

/// Resolved settings for one command. Every non-path value that was looked
/// up is recorded and feeds the config hash.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-").to_ascii_lowercase()
}

/// Parses `key = value` lines. `#` starts a comment line; values may be
/// wrapped in double quotes.
pub fn parse_config(text: &str, known: &BTreeSet<String>) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = normalize_key(k);
        if !known.contains(&key) {
            return Err(CliError::config(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        if out.insert(key.clone(), v.to_string()).is_some() {
            return Err(CliError::config(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

impl Settings {
    pub fn load(path: Option<&Path>, known: &BTreeSet<String>) -> CliResult<Self> {
        let file = match path {
            None => BTreeMap::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("reading config {}: {e}", p.display())))?;
                parse_config(&text, known)?
            }
        };
        Ok(Self { file, resolved: BTreeMap::new() })
    }

    #[cfg(test)]
    pub fn from_map(file: BTreeMap<String, String>) -> Self {
        Self { file, resolved: BTreeMap::new() }
    }

    fn from_file<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::config(format!("config key `{key}` = {raw:?}: {e}"))),
        }
    }

    /// Flag, else config file, else `default`.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        let shown = v.as_ref().map_or_else(|| "none".to_string(), |v| v.to_string());
        self.resolved.insert(key.to_string(), shown);
        Ok(v)
    }

    /// Like [`Settings::get`] for knobs that cannot change results, such
    /// as thread counts; not part of the hash.
    pub fn get_unhashed<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        })
    }

    /// Switch flags: on when given on the command line or set to true in
    /// the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        let v = flag || self.from_file::<bool>(key)?.unwrap_or(false);
        if key != "force" {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Paths are resolved like other settings but kept out of the hash, so
    /// moving a run directory does not change lineage.
    pub fn path(&mut self, key: &str, flag: Option<PathBuf>, default: impl FnOnce() -> PathBuf) -> CliResult<PathBuf> {
        Ok(match flag {
            Some(p) => p,
            None => self.from_file::<PathBuf>(key)?.unwrap_or_else(default),
        })
    }

    /// Records a derived value in the hash without consulting flags or file.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn config_hash(&self) -> String {
        fingerprint(&self.resolved)
    }
}
