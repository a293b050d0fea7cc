//! Reproducible campaign paths.
//!
//! Every stage `k` draws from its own ChaCha8 stream keyed by `(seed, k)`, so
//! the first `K` stages of a path do not depend on the horizon: sweeps over `K`
//! see nested prefixes of the same realisation.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{OpinionDistribution, Scenario};
use crate::dynamics::{CampaignWeights, OpinionMatrix};
use crate::real::Real;

/// One campaign as observed by the influencers.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct StageRealization<T> {
    /// 1-based campaign index.
    pub k: usize,
    pub x: OpinionMatrix<T>,
    pub weights: CampaignWeights<T>,
}

/// Seed of Monte Carlo trial `trial` derived from a base seed (SplitMix64 finaliser).
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base
        .wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum OpinionSampler {
    Explicit(WeightedIndex<f64>),
    Product(Vec<WeightedIndex<f64>>),
}

/// Pre-built samplers for one scenario.
pub struct PathSampler<'a, T: Real> {
    scenario: &'a Scenario<T>,
    opinions: OpinionSampler,
    durations: WeightedIndex<f64>,
}

fn index<T: Real>(probs: &[T]) -> WeightedIndex<f64> {
    WeightedIndex::new(probs.iter().map(|p| p.as_f64())).expect("validated pmf")
}

impl<'a, T: Real> PathSampler<'a, T> {
    pub fn new(scenario: &'a Scenario<T>) -> Self {
        let opinions = match scenario.opinions() {
            OpinionDistribution::Explicit { probs, .. } => OpinionSampler::Explicit(index(probs)),
            OpinionDistribution::Product { marginals } => {
                OpinionSampler::Product(marginals.iter().map(|d| index(&d.probs)).collect())
            }
        };
        Self {
            scenario,
            opinions,
            durations: index(&scenario.durations().probs),
        }
    }

    /// Stage `k` (1-based) of the path with the given seed.
    pub fn stage(&self, seed: u64, k: usize) -> StageRealization<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let x = match (&self.opinions, self.scenario.opinions()) {
            (OpinionSampler::Explicit(idx), OpinionDistribution::Explicit { support, .. }) => {
                support[idx.sample(&mut rng)].clone()
            }
            (OpinionSampler::Product(idxs), OpinionDistribution::Product { marginals }) => {
                let rows = idxs
                    .iter()
                    .zip(marginals)
                    .map(|(idx, d)| d.rows[idx.sample(&mut rng)].clone())
                    .collect();
                OpinionMatrix::new(rows).expect("validated rows")
            }
            _ => unreachable!("sampler built from this scenario"),
        };
        let weights = self.scenario.duration_weights()[self.durations.sample(&mut rng)].clone();
        StageRealization { k, x, weights }
    }

    /// Stages `1..=K` for the scenario's horizon.
    pub fn path(&self, seed: u64) -> Vec<StageRealization<T>> {
        (1..=self.scenario.horizon()).map(|k| self.stage(seed, k)).collect()
    }
}

/// Sample the scenario's `K` campaigns. Deterministic in `seed`.
pub fn sample_path<T: Real>(scenario: &Scenario<T>, seed: u64) -> Vec<StageRealization<T>> {
    PathSampler::new(scenario).path(seed)
}
