use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use batchlab::calibration::{Money, TreatmentKind, TreatmentSpec};
use serde::{Deserialize, Serialize};

pub const PORT_VAR: &str = "BATCHLAB_PORT";
pub const LOG_DIR_VAR: &str = "BATCHLAB_LOG_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{var}={value:?} is not a valid port")]
    Port { var: &'static str, value: String },
    #[error("treatment {kind}: {source}")]
    Treatment {
        kind: TreatmentKind,
        source: batchlab::Error,
    },
}

/// Changes to one treatment's published terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentTerms {
    pub threshold: Option<f64>,
    pub per_unit: Option<Money>,
    pub base_fee: Option<Money>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: IpAddr,
    pub port: u16,
    /// Append-only session logs; sessions found here are restored at start.
    pub log_dir: Option<PathBuf>,
    /// Built UI assets served for every path the API does not claim.
    pub static_dir: Option<PathBuf>,
    /// Keyed by `IT`, `GT`, `GT_NUDGE` or `GT_ST`.
    pub treatments: BTreeMap<TreatmentKind, TreatmentTerms>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            log_dir: None,
            static_dir: None,
            treatments: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Applies `BATCHLAB_PORT` and `BATCHLAB_LOG_DIR` from `lookup`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        if let Some(value) = lookup(PORT_VAR) {
            self.port = value.trim().parse().map_err(|_| ConfigError::Port {
                var: PORT_VAR,
                value,
            })?;
        }
        if let Some(dir) = lookup(LOG_DIR_VAR).filter(|d| !d.is_empty()) {
            self.log_dir = Some(dir.into());
        }
        Ok(self)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    /// Published terms with the configured changes applied.
    pub fn treatment_specs(&self) -> Result<BTreeMap<TreatmentKind, TreatmentSpec>, ConfigError> {
        TreatmentKind::ALL
            .into_iter()
            .map(|kind| {
                let err = |source| ConfigError::Treatment { kind, source };
                let mut spec = TreatmentSpec::paper(kind).map_err(err)?;
                if let Some(t) = self.treatments.get(&kind) {
                    spec = TreatmentSpec::with_terms(
                        kind,
                        spec.params.clone(),
                        t.base_fee.unwrap_or(spec.base_fee),
                        t.threshold.unwrap_or(spec.threshold),
                        t.per_unit.unwrap_or(spec.per_unit),
                        t.horizon.unwrap_or(spec.horizon),
                    )
                    .map_err(err)?;
                }
                Ok((kind, spec))
            })
            .collect()
    }
}
