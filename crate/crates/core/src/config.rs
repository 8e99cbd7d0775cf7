//! Run configuration, resolved as flags > environment > config file > defaults.
//!
//! RPC credentials are only read from the environment or the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::amount::Amount;
use crate::ingest::WireLayoutConfig;
use crate::report::OutputFormat;
use crate::rtt::{DetectConfig, DEFAULT_BASE_FEES, DEFAULT_TOP_N};
use crate::synth::SynthConfig;

pub const ENV_CONFIG: &str = "ZLINKAGE_CONFIG";
pub const ENV_STORE: &str = "ZLINKAGE_STORE";
pub const ENV_OUT_DIR: &str = "ZLINKAGE_OUT_DIR";
pub const ENV_RPC_URL: &str = "ZLINKAGE_RPC_URL";
pub const ENV_RPC_USER: &str = "ZLINKAGE_RPC_USER";
pub const ENV_RPC_PASSWORD: &str = "ZLINKAGE_RPC_PASSWORD";
pub const ENV_BASE_FEES: &str = "ZLINKAGE_BASE_FEES";
pub const ENV_WINDOW_HOURS: &str = "ZLINKAGE_WINDOW_HOURS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config file {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{key}: {msg}")]
    Value { key: &'static str, msg: String },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpcSection {
    pub url: Option<String>,
    pub user: Option<String>,
    pub password: Option<String>,
    pub concurrency: Option<usize>,
}

/// The TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Coin strings, e.g. `["0.0001", "0.001"]`.
    pub base_fees: Option<Vec<String>>,
    pub fees_from_chain: Option<bool>,
    pub window_hours: Option<u64>,
    pub exclude_consumed: Option<bool>,
    pub top_n: Option<Vec<usize>>,
    pub formats: Option<Vec<OutputFormat>>,
    pub address_tags: Option<PathBuf>,
    pub exact: Option<bool>,
    pub rpc: RpcSection,
    pub wire: Option<WireLayoutConfig>,
    pub synth: Option<SynthConfig>,
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<FileConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_owned(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        FileConfig::parse(&text, path)
    }
}

/// Values given on the command line. Credentials are deliberately absent.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub store: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub base_fees: Option<Vec<String>>,
    pub fees_from_chain: Option<bool>,
    pub window_hours: Option<u64>,
    pub exclude_consumed: Option<bool>,
    pub top_n: Option<Vec<usize>>,
    pub formats: Option<Vec<OutputFormat>>,
    pub address_tags: Option<PathBuf>,
    pub exact: Option<bool>,
    pub rpc_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RpcSettings {
    pub url: Option<String>,
    pub credentials: Option<(String, String)>,
    pub concurrency: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub store_path: PathBuf,
    pub out_dir: PathBuf,
    pub detect: DetectConfig,
    /// Replace the base fees with the chain's own five most common fees.
    pub fees_from_chain: bool,
    pub top_n: Vec<usize>,
    pub formats: BTreeSet<OutputFormat>,
    pub address_tags: Option<PathBuf>,
    pub exact_coins: bool,
    pub rpc: RpcSettings,
    pub wire: WireLayoutConfig,
    pub synth: SynthConfig,
}

fn parse_fees(key: &'static str, fees: &[String]) -> Result<Vec<Amount>, ConfigError> {
    fees.iter()
        .map(|s| Amount::parse_coins(s.trim()).map_err(|e| ConfigError::Value { key, msg: e.to_string() }))
        .collect()
}

impl RunConfig {
    /// Merges the layers. `env` looks up one environment variable.
    pub fn resolve(
        flags: &Overrides,
        env: impl Fn(&str) -> Option<String>,
        file: &FileConfig,
    ) -> Result<RunConfig, ConfigError> {
        let env_fees = env(ENV_BASE_FEES).map(|s| s.split(',').map(str::to_owned).collect::<Vec<_>>());
        let env_window = env(ENV_WINDOW_HOURS)
            .map(|s| s.trim().parse::<u64>().map_err(|e| ConfigError::Value { key: ENV_WINDOW_HOURS, msg: e.to_string() }))
            .transpose()?;

        let base_fees = match flags.base_fees.as_ref().or(env_fees.as_ref()).or(file.base_fees.as_ref()) {
            Some(list) => parse_fees("base_fees", list)?,
            None => DEFAULT_BASE_FEES.to_vec(),
        };
        let window_hours = flags.window_hours.or(env_window).or(file.window_hours).unwrap_or(24);
        if window_hours == 0 {
            return Err(ConfigError::Value { key: "window_hours", msg: "must be positive".into() });
        }
        let top_n = flags.top_n.clone().or_else(|| file.top_n.clone()).unwrap_or_else(|| DEFAULT_TOP_N.to_vec());
        if top_n.is_empty() {
            return Err(ConfigError::Value { key: "top_n", msg: "needs at least one size".into() });
        }
        let formats: BTreeSet<OutputFormat> = flags
            .formats
            .clone()
            .or_else(|| file.formats.clone())
            .map(|v| v.into_iter().collect())
            .unwrap_or_else(|| OutputFormat::ALL.into_iter().collect());

        let user = env(ENV_RPC_USER).or_else(|| file.rpc.user.clone());
        let password = env(ENV_RPC_PASSWORD).or_else(|| file.rpc.password.clone());
        let credentials = match (user, password) {
            (Some(u), Some(p)) => Some((u, p)),
            (None, None) => None,
            _ => {
                return Err(ConfigError::Value { key: "rpc", msg: "user and password must be given together".into() })
            }
        };

        Ok(RunConfig {
            store_path: flags
                .store
                .clone()
                .or_else(|| env(ENV_STORE).map(PathBuf::from))
                .or_else(|| file.store.clone())
                .unwrap_or_else(|| PathBuf::from("zlinkage.store")),
            out_dir: flags
                .out_dir
                .clone()
                .or_else(|| env(ENV_OUT_DIR).map(PathBuf::from))
                .or_else(|| file.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("report")),
            detect: DetectConfig {
                base_fees,
                window_hours,
                exclude_consumed: flags.exclude_consumed.or(file.exclude_consumed).unwrap_or(true),
            },
            fees_from_chain: flags.fees_from_chain.or(file.fees_from_chain).unwrap_or(false),
            top_n,
            formats,
            address_tags: flags.address_tags.clone().or_else(|| file.address_tags.clone()),
            exact_coins: flags.exact.or(file.exact).unwrap_or(false),
            rpc: RpcSettings {
                url: flags.rpc_url.clone().or_else(|| env(ENV_RPC_URL)).or_else(|| file.rpc.url.clone()),
                credentials,
                concurrency: file.rpc.concurrency.unwrap_or(4).max(1),
            },
            wire: file.wire.clone().unwrap_or_default(),
            synth: file.synth.clone().unwrap_or_default(),
        })
    }
}
