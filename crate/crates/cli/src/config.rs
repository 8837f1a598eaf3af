use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use epilog_core::model::Timestamp;
use epilog_core::relevance::RelevanceParams;
use epilog_core::space::{load_map, ArenaMap};
use serde::{Deserialize, Serialize};

pub const DATA_DIR_ENV: &str = "EPILOG_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = ".epilog";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Wall,
    /// Every command sees this instant as "now".
    Fixed(Timestamp),
}

impl Clock {
    pub fn now(self) -> Timestamp {
        match self {
            Clock::Fixed(t) => t,
            Clock::Wall => {
                let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
                Timestamp(u64::try_from(ms).unwrap_or(u64::MAX))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub params: RelevanceParams,
    /// Arena map; the bundled arena when absent.
    pub map: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub clock: Clock,
}

impl EngineConfig {
    /// Reads the config file if given. Relative paths inside it are taken
    /// from the file's directory. The data dir env var wins over the file.
    pub fn load(path: Option<&Path>) -> Result<EngineConfig> {
        let mut cfg = match path {
            None => EngineConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("IoError: {}", p.display()))?;
                let mut cfg: EngineConfig =
                    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("InvalidConfig: {}: {e}", p.display()))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.map = cfg.map.map(|m| base.join(m));
                cfg.data_dir = cfg.data_dir.map(|d| base.join(d));
                cfg
            }
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.data_dir = Some(PathBuf::from(dir));
        }
        if let Err(e) = cfg.params.check() {
            bail!("InvalidConfig: {e}");
        }
        Ok(cfg)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    pub fn arena(&self) -> Result<ArenaMap> {
        match &self.map {
            None => Ok(ArenaMap::default_arena()),
            Some(p) => Ok(load_map(p)?),
        }
    }

    /// `--now` when given, else the configured clock.
    pub fn now(&self, flag: Option<u64>) -> Timestamp {
        flag.map(Timestamp).unwrap_or_else(|| self.clock.now())
    }
}
