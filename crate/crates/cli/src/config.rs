//! Scenario configuration file. Every key is optional; command-line flags win
//! over the file, the file wins over built-in defaults.
//!
//! ```toml
//! seed = 7
//! out = "runs/wifi"
//! se_config = "se.toml"          # or an inline [se] table, not both
//! model = "wifi"
//! timeout_ms = 500.0
//! ceiling_ms = 2000.0
//! un = "00000080"
//!
//! [latency]                      # any subset of the latency parameters
//! wifi_min_ms = 120.0
//!
//! [relay]
//! pin = "1234"
//! access_granted = true
//!
//! [endpoints]
//! se_host = "127.0.0.1:7100"
//! relay = "127.0.0.1:7101"
//! terminal = "127.0.0.1:7102"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use relaysim::relay::{AccessPath, LatencyParams};
use relaysim::SeConfig;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Secure-element configuration file, relative to this file.
    pub se_config: Option<PathBuf>,
    pub se: Option<SeConfig>,
    pub model: Option<String>,
    pub latency: Option<LatencyParams>,
    pub timeout_ms: Option<f64>,
    pub ceiling_ms: Option<f64>,
    pub un: Option<String>,
    pub relay: RelaySection,
    pub endpoints: Endpoints,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaySection {
    pub pin: Option<String>,
    pub access_granted: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub se_host: Option<String>,
    pub relay: Option<String>,
    pub terminal: Option<String>,
}

impl ScenarioConfig {
    /// Reads `path`, or returns the defaults when there is none. The
    /// secure-element config is resolved and validated here.
    pub fn load(path: Option<&Path>) -> Result<(Self, SeConfig), Failure> {
        let Some(path) = path else {
            return Ok((Self::default(), SeConfig::default()));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: Self =
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let se = match (config.se.take(), &config.se_config) {
            (Some(_), Some(_)) => {
                return Err(Failure::Usage("config sets both se_config and [se]".into()));
            }
            (Some(se), None) => {
                se.validate().map_err(|e| Failure::Usage(e.to_string()))?;
                se
            }
            (None, Some(file)) => SeConfig::load(&base.join(file)).map_err(|e| Failure::Usage(e.to_string()))?,
            (None, None) => SeConfig::default(),
        };
        if let Some(out) = &config.out {
            config.out = Some(base.join(out));
        }
        Ok((config, se))
    }

    pub fn latency(&self) -> LatencyParams {
        self.latency.clone().unwrap_or_default()
    }

    pub fn model(&self) -> Result<Option<AccessPath>, Failure> {
        self.model.as_deref().map(parse_path).transpose()
    }
}

pub fn parse_path(text: &str) -> Result<AccessPath, Failure> {
    text.parse().map_err(|e: relaysim::relay::latency::UnknownPath| Failure::Usage(e.to_string()))
}

pub fn parse_un(text: &str) -> Result<[u8; 4], Failure> {
    let bytes = relaysim::hexfmt::parse_hex(text).map_err(|e| Failure::Usage(format!("--un: {e}")))?;
    bytes.try_into().map_err(|_| Failure::Usage("--un must be 4 bytes".into()))
}
