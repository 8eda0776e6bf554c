//! The run configuration file.
//!
//! Every field is optional and defaults to the experimental setting, so an
//! empty file (or none) is the same as `--preset experimental`:
//!
//! ```toml
//! seed = 7
//! horizon = 600.0
//! policy = "batch"              # or "assign-one", "all-assign-one"
//! reward = "personal"           # or "group", "occupancy"
//!
//! [params]
//! rooms = 4
//! physicians = 2
//! arrival_rate = 0.0333333333
//! service_rate = 0.0666666667
//! group_dist = [0.0, 0.0, 1.0]
//!
//! # An explicit profile replaces `policy`.
//! # [profile]
//! # decision_order = [1, 0]
//! # [[profile.rules]] ...
//!
//! [server]
//! port = 8080
//! log_dir = "sessions"
//! [server.treatments.GT]
//! threshold = 36
//! per_unit = "$0.60"
//! ```

use std::path::Path;

use anyhow::Context;
use batchlab::{StrategyProfile, SystemParams};
use serde::{Deserialize, Serialize};

use crate::model::Policy;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub rooms: Option<u32>,
    pub physicians: Option<usize>,
    pub arrival_rate: Option<f64>,
    pub service_rate: Option<f64>,
    pub group_dist: Option<Vec<f64>>,
}

impl ParamsConfig {
    pub fn apply(&self, mut p: SystemParams) -> SystemParams {
        if let Some(v) = self.rooms {
            p.rooms = v;
        }
        if let Some(v) = self.physicians {
            p.physicians = v;
        }
        if let Some(v) = self.arrival_rate {
            p.arrival_rate = v;
        }
        if let Some(v) = self.service_rate {
            p.service_rate = v;
        }
        if let Some(v) = &self.group_dist {
            p.group_dist = v.clone();
        }
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub policy: Option<Policy>,
    pub reward: Option<String>,
    pub params: ParamsConfig,
    pub profile: Option<StrategyProfile>,
    pub server: batchlab_server::Config,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).map_err(|e| crate::Usage(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}
