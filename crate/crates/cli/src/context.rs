use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::Settings;
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub settings: BTreeMap<String, String>,
}

pub struct RunContext {
    pub command: &'static str,
    pub settings: Settings,
    pub out: PathBuf,
    pub seed: u64,
    pub deterministic: bool,
}

impl RunContext {
    pub fn new(command: &'static str, settings: Settings) -> Result<Self> {
        let out = settings.path("out").unwrap_or_else(|| PathBuf::from("segfair-out"));
        let seed = settings.parse_or("seed", 0u64)?;
        let deterministic = settings.parse_or("deterministic", false)?;
        Ok(Self {
            command,
            settings,
            out,
            seed,
            deterministic,
        })
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            tool: "segfair",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.to_string(),
            seed: self.seed,
            config_hash: self.settings.hash(),
            settings: self
                .settings
                .resolved()
                .iter()
                .filter(|(k, _)| !matches!(k.as_str(), "out" | "jobs" | "deterministic"))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Wall-clock stamp for figures; `None` in deterministic runs.
    pub fn timestamp(&self) -> Option<u64> {
        if self.deterministic {
            return None;
        }
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn metadata(&self) -> Result<PathBuf> {
        Ok(Path::new(self.settings.require("metadata")?).to_path_buf())
    }
}
