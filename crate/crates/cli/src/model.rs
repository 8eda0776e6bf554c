use std::iter;

use batchlab::des::{Distribution, PathLaws};
use batchlab::{DecisionRule, RewardSpec, StrategyProfile, SystemParams};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Usage;

/// Named profiles. `batch` and `assign-one` fix the focal physician's
/// rule; every other physician claims one at a time and decides first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Batch,
    AssignOne,
    AllAssignOne,
}

impl Policy {
    pub fn profile(self, physicians: usize) -> StrategyProfile {
        let order = || (1..physicians).chain(iter::once(0)).collect();
        let focal = match self {
            Policy::Batch => DecisionRule::greedy(2),
            Policy::AssignOne => DecisionRule::assign_one(2),
            Policy::AllAssignOne => return StrategyProfile::all_assign_one(physicians, 2),
        };
        StrategyProfile {
            rules: iter::once(focal)
                .chain(iter::repeat_n(DecisionRule::assign_one(1), physicians.saturating_sub(1)))
                .collect(),
            decision_order: order(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceLaw {
    Exponential,
    Deterministic,
    Lognormal,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub policy: Option<Policy>,
    /// Group arrival rate.
    #[arg(long = "lambda", allow_hyphen_values = true)]
    pub arrival_rate: Option<f64>,
    /// Per-physician service rate.
    #[arg(long = "mu", allow_hyphen_values = true)]
    pub service_rate: Option<f64>,
    #[arg(long)]
    pub rooms: Option<u32>,
}

#[derive(Args, Debug, Clone)]
pub struct LawArgs {
    /// Service-time law of generated paths, with the model's mean.
    #[arg(long, value_enum, default_value = "exponential")]
    pub service: ServiceLaw,
    /// Coefficient of variation of the lognormal law.
    #[arg(long, default_value_t = 1.0)]
    pub cv: f64,
}

impl LawArgs {
    pub fn laws(&self, params: &SystemParams) -> PathLaws {
        let mean = 1.0 / params.service_rate;
        match self.service {
            ServiceLaw::Exponential => PathLaws::exponential(),
            ServiceLaw::Deterministic => PathLaws::with_service(Distribution::Deterministic { value: mean }),
            ServiceLaw::Lognormal => PathLaws::with_service(Distribution::Lognormal { mean, cv: self.cv }),
        }
    }
}

/// A fully resolved model: flags over the config file over the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: SystemParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    /// Every rule expanded to an explicit table.
    pub profile: StrategyProfile,
}

impl Model {
    pub fn resolve(args: &ModelArgs, config: &RunConfig) -> anyhow::Result<Self> {
        let mut params = config.params.apply(SystemParams::experimental());
        if let Some(v) = args.arrival_rate {
            params.arrival_rate = v;
        }
        if let Some(v) = args.service_rate {
            params.service_rate = v;
        }
        if let Some(v) = args.rooms {
            params.rooms = v;
        }
        params.validate()?;
        let (policy, profile) = match (args.policy, &config.profile) {
            (None, Some(p)) => (None, p.clone()),
            (flag, _) => {
                let policy = flag.or(config.policy).unwrap_or(Policy::Batch);
                (Some(policy), policy.profile(params.physicians))
            }
        };
        profile.validate(params.physicians)?;
        let expanded = profile.expand_tables(&params)?;
        let entries: usize = expanded
            .rules
            .iter()
            .map(|r| match &r.kind {
                batchlab::model::RuleKind::Table { entries } => entries.len(),
                _ => 0,
            })
            .sum();
        tracing::info!(
            policy = policy.map_or("custom".into(), |p| format!("{p:?}")),
            physicians = params.physicians,
            entries,
            "expanded profile to decision tables"
        );
        for (i, rule) in expanded.rules.iter().enumerate() {
            if let batchlab::model::RuleKind::Table { entries } = &rule.kind {
                for e in entries {
                    tracing::debug!(physician = i, state = %e.state, claim = e.claim);
                }
            }
        }
        Ok(Self {
            params,
            policy,
            profile: expanded,
        })
    }

    pub fn label(&self) -> String {
        match self.policy {
            Some(Policy::Batch) => "batch".into(),
            Some(Policy::AssignOne) => "assign-one".into(),
            Some(Policy::AllAssignOne) => "all-assign-one".into(),
            None => "custom".into(),
        }
    }

    pub fn describe(&self) -> String {
        let p = &self.params;
        format!(
            "policy {} on M={} rooms, N={} physicians, lambda={:.6}, mu={:.6}, groups {:?}",
            self.label(),
            p.rooms,
            p.physicians,
            p.arrival_rate,
            p.service_rate,
            p.group_dist
        )
    }
}

pub fn parse_reward(s: &str) -> anyhow::Result<RewardSpec> {
    s.parse::<RewardSpec>()
        .map_err(|e| Usage(format!("--reward: {e}")).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use batchlab::Strategy;

    #[test]
    fn named_policies_match_the_experiment() {
        assert_eq!(Policy::Batch.profile(2), StrategyProfile::experimental(Strategy::Batch));
        assert_eq!(Policy::AssignOne.profile(2), StrategyProfile::experimental(Strategy::NoBatch));
        assert_eq!(Policy::AssignOne.profile(3).decision_order, vec![1, 2, 0]);
    }

    #[test]
    fn flags_override_the_file() {
        let config = RunConfig {
            policy: Some(Policy::AssignOne),
            ..RunConfig::default()
        };
        let args = ModelArgs {
            arrival_rate: Some(0.05),
            ..ModelArgs::default()
        };
        let m = Model::resolve(&args, &config).unwrap();
        assert_eq!(m.policy, Some(Policy::AssignOne));
        assert_eq!(m.params.arrival_rate, 0.05);
        let bad = ModelArgs {
            arrival_rate: Some(-1.0),
            ..ModelArgs::default()
        };
        assert!(Model::resolve(&bad, &config).is_err());
    }
}
