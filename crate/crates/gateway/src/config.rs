use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use ipoi_core::chat::{DEFAULT_CONTEXT_WINDOW, DEFAULT_THRESHOLD};
use ipoi_core::geofence::DEFAULT_COOLDOWN_SECS;
use ipoi_core::recommender::DEFAULT_RADIUS_M;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub cooldown_secs: i64,
    pub radius_m: f64,
    pub threshold: f64,
    pub context_window: usize,
    /// Intent definitions; the shipped set when absent.
    pub intents_path: Option<PathBuf>,
    /// Food-day calendar; the shipped calendar when absent.
    pub calendar_path: Option<PathBuf>,
    /// Bearer tokens accepted for authoring. Empty leaves authoring open.
    pub auth_tokens: Vec<String>,
    /// Snapshot and truncate the event log after this many events.
    pub compact_every: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("ipoi-data"),
            cooldown_secs: DEFAULT_COOLDOWN_SECS,
            radius_m: DEFAULT_RADIUS_M,
            threshold: DEFAULT_THRESHOLD,
            context_window: DEFAULT_CONTEXT_WINDOW,
            intents_path: None,
            calendar_path: None,
            auth_tokens: Vec::new(),
            compact_every: 1000,
        }
    }
}

const ENV_PREFIX: &str = "IPOI_";

impl Config {
    /// Reads the TOML file (if any), then applies `IPOI_*` overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::Read(p.display().to_string(), e.to_string()))?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => Config::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .parse()
                .map_err(|_| ConfigError::Env(key.to_owned(), value.to_owned()))
        }
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "LISTEN" => self.listen = parse(&key, &value)?,
                "DATA_DIR" => self.data_dir = PathBuf::from(value),
                "COOLDOWN_SECS" => self.cooldown_secs = parse(&key, &value)?,
                "RADIUS_M" => self.radius_m = parse(&key, &value)?,
                "THRESHOLD" => self.threshold = parse(&key, &value)?,
                "CONTEXT_WINDOW" => self.context_window = parse(&key, &value)?,
                "INTENTS_PATH" => self.intents_path = Some(PathBuf::from(value)),
                "CALENDAR_PATH" => self.calendar_path = Some(PathBuf::from(value)),
                "AUTH_TOKENS" => {
                    self.auth_tokens = value
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(str::to_owned)
                        .collect()
                }
                "COMPACT_EVERY" => self.compact_every = parse(&key, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cooldown_secs < 0 {
            return Err(ConfigError::Invalid("cooldown_secs must be >= 0".into()));
        }
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(ConfigError::Invalid("radius_m must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid("threshold must be within [0, 1]".into()));
        }
        if self.context_window == 0 {
            return Err(ConfigError::Invalid("context_window must be >= 1".into()));
        }
        if self.compact_every == 0 {
            return Err(ConfigError::Invalid("compact_every must be >= 1".into()));
        }
        Ok(())
    }
}
