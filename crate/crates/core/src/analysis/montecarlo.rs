//! Seeded Monte Carlo estimation of expected rewards, used to cross-check
//! the exact solution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{in_target, RewardKind};
use crate::dtmc::{initial_distribution, skip_power, state_power, HardwareProfile, InitialMode};
use crate::dynamics::{firing_successor, sample_failure_vector, skip_successor};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::state::GlobalState;

const SHARD: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Sample the initial configuration from the model's initial mode.
    Initial(InitialMode),
    /// Every run starts in this state.
    State(GlobalState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub lambda: f64,
    pub reward: RewardKind,
    pub samples: usize,
    pub seed: u64,
    /// Runs longer than this many transitions are censored.
    pub max_steps: usize,
    pub start: Start,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub max_observed: f64,
    /// Completed runs contributing to the estimate.
    pub samples: usize,
    /// Runs cut off at `max_steps`; non-zero means the estimate is biased.
    pub censored: usize,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    max: f64,
    censored: usize,
}

impl Moments {
    fn empty() -> Self {
        Moments {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            max: 0.0,
            censored: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        self.max = self.max.max(x);
    }

    fn merge(self, o: Moments) -> Moments {
        let count = self.count + o.count;
        if count == 0 {
            return Moments {
                censored: self.censored + o.censored,
                ..Moments::empty()
            };
        }
        let d = o.mean - self.mean;
        let (na, nb) = (self.count as f64, o.count as f64);
        Moments {
            count,
            mean: self.mean + d * nb / count as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / count as f64,
            max: self.max.max(o.max),
            censored: self.censored + o.censored,
        }
    }
}

enum Sampler {
    Uniform,
    Weighted(Vec<GlobalState>, WeightedIndex<f64>),
    Fixed(GlobalState),
}

impl Sampler {
    fn draw<R: Rng>(&self, p: &ModelParams, rng: &mut R) -> GlobalState {
        match self {
            Sampler::Uniform => {
                let mut counts = vec![0u32; p.t as usize];
                for _ in 0..p.n {
                    counts[rng.random_range(0..p.t as usize)] += 1;
                }
                GlobalState::new(counts)
            }
            Sampler::Weighted(states, dist) => states[dist.sample(rng)].clone(),
            Sampler::Fixed(s) => s.clone(),
        }
    }
}

/// Simulates runs until the phase coherence reaches `lambda`, accumulating
/// the chosen reward. Identical inputs give identical output regardless of
/// thread count.
pub fn monte_carlo(
    p: &ModelParams,
    profile: &HardwareProfile,
    config: &MonteCarloConfig,
) -> Result<MonteCarloEstimate> {
    let p = p.validate()?;
    if config.samples == 0 {
        return Err(Error::InvalidQuery("samples must be positive".into()));
    }
    let sampler = match &config.start {
        Start::Initial(InitialMode::Full) => Sampler::Uniform,
        Start::Initial(mode) => {
            let (states, weights): (Vec<_>, Vec<_>) =
                initial_distribution(&p, *mode)?.into_iter().unzip();
            let dist =
                WeightedIndex::new(weights).map_err(|e| Error::InvalidQuery(e.to_string()))?;
            Sampler::Weighted(states, dist)
        }
        Start::State(s) => {
            s.check(&p)?;
            Sampler::Fixed(s.clone())
        }
    };
    let energies = profile.clone().validate()?.energies(p.t);
    let t = f64::from(p.t);

    let run = |rng: &mut ChaCha8Rng| -> Result<Option<f64>> {
        let mut sigma = sampler.draw(&p, rng);
        let mut total = 0.0;
        for _ in 0..config.max_steps {
            if in_target(&sigma, config.lambda) {
                return Ok(Some(total));
            }
            if sigma.is_firing() {
                let f = sample_failure_vector(&sigma, &p, rng)?;
                let next = firing_successor(&sigma, &f, &p)?;
                total += match config.reward {
                    RewardKind::Time => 1.0 / t,
                    RewardKind::Power => {
                        state_power(&sigma, p.r, &energies)
                            + f64::from(next.count(1)) * energies.transmit_wh
                    }
                };
                sigma = next;
            } else {
                let (next, skipped) = skip_successor(&sigma)?;
                total += match config.reward {
                    RewardKind::Time => f64::from(skipped) / t,
                    RewardKind::Power => skip_power(&sigma, p.r, &energies),
                };
                sigma = next;
            }
        }
        Ok(in_target(&sigma, config.lambda).then_some(total))
    };

    let shards = config.samples.div_ceil(SHARD);
    let parts: Vec<Result<Moments>> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(shard as u64);
            let count = SHARD.min(config.samples - shard * SHARD);
            let mut m = Moments::empty();
            for _ in 0..count {
                match run(&mut rng)? {
                    Some(x) => m.push(x),
                    None => m.censored += 1,
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::empty();
    for part in parts {
        total = total.merge(part?);
    }
    let std_error = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean: if total.count > 0 {
            total.mean
        } else {
            f64::NAN
        },
        std_error,
        max_observed: total.max,
        samples: total.count,
        censored: total.censored,
    })
}
