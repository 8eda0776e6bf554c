use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;

const ARRIVAL_STREAM: u64 = 0;
const SERVICE_STREAM: u64 = 1;

/// Positive random durations used for inter-arrival and service times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    /// Parameterized by its mean and coefficient of variation.
    Lognormal { mean: f64, cv: f64 },
}

impl Distribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Deterministic { value } => value,
            Distribution::Lognormal { mean, .. } => mean,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Distribution::Exponential { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Distribution::Deterministic { value } => value.is_finite() && value > 0.0,
            Distribution::Lognormal { mean, cv } => {
                mean.is_finite() && mean > 0.0 && cv.is_finite() && cv >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad distribution {self:?}")))
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Distribution::Exponential { rate } => Sampler::Exp(Exp::new(rate).expect("validated")),
            Distribution::Deterministic { value } => Sampler::Fixed(value),
            Distribution::Lognormal { mean, cv } => {
                let s2 = (1.0 + cv * cv).ln();
                let m = mean.ln() - 0.5 * s2;
                Sampler::LogNormal(LogNormal::new(m, s2.sqrt()).expect("validated"))
            }
        }
    }
}

enum Sampler {
    Exp(Exp<f64>),
    Fixed(f64),
    LogNormal(LogNormal<f64>),
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Fixed(v) => *v,
            Sampler::LogNormal(d) => d.sample(rng),
        }
    }
}

/// Which distributions a sample path draws from. `None` means the
/// exponential law implied by the system parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PathLaws {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interarrival: Option<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<Distribution>,
}

impl PathLaws {
    pub fn exponential() -> Self {
        Self::default()
    }

    pub fn with_service(service: Distribution) -> Self {
        Self {
            interarrival: None,
            service: Some(service),
        }
    }

    fn resolve(&self, params: &SystemParams) -> (Distribution, Distribution) {
        (
            self.interarrival.unwrap_or(Distribution::Exponential {
                rate: params.arrival_rate,
            }),
            self.service.unwrap_or(Distribution::Exponential {
                rate: params.service_rate,
            }),
        )
    }

    /// True when the path is a realization of the Markov model.
    pub fn is_markovian(&self) -> bool {
        self.interarrival.is_none_or(|d| d.is_exponential())
            && self.service.is_none_or(|d| d.is_exponential())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub epoch: f64,
    pub group_size: u32,
}

/// Everything needed to regenerate a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub seed: u64,
    pub horizon: f64,
    pub params: SystemParams,
    #[serde(default)]
    pub laws: PathLaws,
}

/// One fixed realization of the arrival stream and of the service
/// requirements `S_1, S_2, ...`, where `S_k` belongs to the `k`-th service
/// initiation, whichever patient that turns out to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub seed: u64,
    pub horizon: f64,
    pub params: SystemParams,
    #[serde(default)]
    pub laws: PathLaws,
    pub arrivals: Vec<Arrival>,
    /// One draw per offered patient, which bounds the number of initiations.
    pub service_draws: Vec<f64>,
}

impl SamplePath {
    pub fn meta(&self) -> PathMeta {
        PathMeta {
            seed: self.seed,
            horizon: self.horizon,
            params: self.params.clone(),
            laws: self.laws,
        }
    }

    pub fn offered_patients(&self) -> u64 {
        self.arrivals.iter().map(|a| a.group_size as u64).sum()
    }

    /// A path with the given arrivals and draws, for hand-built scenarios.
    pub fn explicit(
        params: SystemParams,
        horizon: f64,
        arrivals: Vec<Arrival>,
        service_draws: Vec<f64>,
    ) -> Self {
        Self {
            seed: 0,
            horizon,
            params,
            laws: PathLaws::default(),
            arrivals,
            service_draws,
        }
    }

    /// Checks the ordering and positivity invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Invalid(format!("bad horizon {}", self.horizon)));
        }
        let mut last = f64::NEG_INFINITY;
        for a in &self.arrivals {
            if !(a.epoch > last && a.epoch >= 0.0 && a.epoch <= self.horizon) {
                return Err(Error::Invalid(format!(
                    "arrival epoch {} out of order or outside [0, {}]",
                    a.epoch, self.horizon
                )));
            }
            if a.group_size == 0 || a.group_size > self.params.max_group() {
                return Err(Error::Invalid(format!("bad group size {}", a.group_size)));
            }
            last = a.epoch;
        }
        if let Some(s) = self.service_draws.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Invalid(format!("non-positive service draw {s}")));
        }
        Ok(())
    }
}

/// Exponential path for the Markov model.
pub fn generate_sample_path(params: &SystemParams, seed: u64, horizon: f64) -> Result<SamplePath> {
    generate_sample_path_with(params, seed, horizon, PathLaws::default())
}

/// Arrivals and service draws come from separate ChaCha streams of the same
/// seed, so the draw sequence does not depend on the horizon.
pub fn generate_sample_path_with(
    params: &SystemParams,
    seed: u64,
    horizon: f64,
    laws: PathLaws,
) -> Result<SamplePath> {
    params.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Invalid(format!("horizon must be > 0, got {horizon}")));
    }
    let (ia, sv) = laws.resolve(params);
    ia.validate()?;
    sv.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ARRIVAL_STREAM);
    let gaps = ia.sampler();
    let sizes = WeightedIndex::new(&params.group_dist)
        .map_err(|e| Error::InvalidParams(format!("group_dist: {e}")))?;
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        t += gaps.draw(&mut rng);
        if t > horizon {
            break;
        }
        arrivals.push(Arrival {
            epoch: t,
            group_size: sizes.sample(&mut rng) as u32 + 1,
        });
    }

    let offered: u64 = arrivals.iter().map(|a| a.group_size as u64).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SERVICE_STREAM);
    let service = sv.sampler();
    let service_draws = (0..offered)
        .map(|_| service.draw(&mut rng).max(f64::MIN_POSITIVE))
        .collect();

    Ok(SamplePath {
        seed,
        horizon,
        params: params.clone(),
        laws,
        arrivals,
        service_draws,
    })
}

/// Rebuilds a path from its metadata.
pub fn regenerate(meta: &PathMeta) -> Result<SamplePath> {
    generate_sample_path_with(&meta.params, meta.seed, meta.horizon, meta.laws)
}
