//! Flat `key = value` settings. Later sources override earlier ones:
//! built-in defaults, then the `--config` file, then `--set k=v`, then
//! dedicated flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Keys that never change results and so stay out of the config hash.
const UNHASHED: &[&str] = &["out", "jobs", "deterministic"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut s = Settings::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| CliError::Input(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
            s.set(k, v);
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.trim().to_string(), value.to_string().trim().to_string());
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for p in pairs {
            let (k, v) = split_pair(p).ok_or_else(|| CliError::Input(format!("--set {p:?}: expected key=value")))?;
            self.set(k, v);
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| CliError::Input(format!("missing required setting {key:?}")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Input(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.values
            .iter()
            .filter(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `key=value` lines in key order, excluding run-only keys.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of [`Settings::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then_some((k, v.trim()))
}

/// Parses `"a,b,c"` into a fixed-size array.
pub fn parse_triple<T: FromStr + Copy>(key: &str, v: &str) -> Result<[T; 3]>
where
    T::Err: Display,
{
    let parts: Vec<&str> = v.split([',', 'x']).map(str::trim).collect();
    let bad = || CliError::Input(format!("{key} = {v:?}: expected three comma-separated values"));
    let vals = match parts.len() {
        1 => vec![parts[0]; 3],
        3 => parts,
        _ => return Err(bad()),
    };
    let mut out = Vec::with_capacity(3);
    for p in vals {
        out.push(p.parse::<T>().map_err(|e| CliError::Input(format!("{key} = {v:?}: {e}")))?);
    }
    Ok([out[0], out[1], out[2]])
}
