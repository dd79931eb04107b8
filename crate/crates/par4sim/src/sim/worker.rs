//! Simulated crowd workers with a hidden linear utility over raw features.

use par4sim_core::features::NUM_FEATURES;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Select(usize),
    DoNotChange,
}

#[derive(Debug, Clone)]
pub struct SimWorker {
    pub worker_id: String,
    /// Weights over the raw features.
    pub weights: [f64; NUM_FEATURES],
    /// 0 picks the best candidate; infinity picks uniformly.
    pub temperature: f64,
    /// Utility of the do-not-change option.
    pub do_not_change_bias: f64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl SimWorker {
    pub fn new(worker_id: impl Into<String>, weights: [f64; NUM_FEATURES], temperature: f64, do_not_change_bias: f64, seed: u64) -> Self {
        Self {
            worker_id: worker_id.into(),
            weights,
            temperature: temperature.max(0.0),
            do_not_change_bias,
            seed,
            rng: <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed),
        }
    }

    pub fn utility(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.weights.iter().zip(features).map(|(w, f)| w * f).sum()
    }

    /// Samples from a softmax over candidate utilities plus a do-not-change
    /// option. Ties in the zero-temperature case go to the lowest index,
    /// with do-not-change last.
    pub fn choose(&mut self, candidates: &[[f64; NUM_FEATURES]]) -> Decision {
        if self.do_not_change_bias == f64::INFINITY || candidates.is_empty() {
            return Decision::DoNotChange;
        }
        let mut utilities: Vec<f64> = candidates.iter().map(|f| self.utility(f)).collect();
        let allow_keep = self.do_not_change_bias > f64::NEG_INFINITY;
        if allow_keep {
            utilities.push(self.do_not_change_bias);
        }
        let pick = if self.temperature == 0.0 {
            let mut best = 0;
            for (i, u) in utilities.iter().enumerate() {
                if *u > utilities[best] {
                    best = i;
                }
            }
            best
        } else if self.temperature.is_infinite() {
            self.rng.random_range(0..utilities.len())
        } else {
            let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = utilities.iter().map(|u| ((u - max) / self.temperature).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut x = self.rng.random::<f64>() * total;
            let mut pick = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                x -= w;
                if x < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        };
        if pick < candidates.len() {
            Decision::Select(pick)
        } else {
            Decision::DoNotChange
        }
    }
}

/// A population of workers around a shared preference. Weights are given
/// in units of each feature's standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrowdConfig {
    pub pool_size: usize,
    pub base_weights: [f64; NUM_FEATURES],
    /// Standard deviation of each worker's offset from the base, applied
    /// to the features the base weights use.
    pub deviation: f64,
    pub temperature: f64,
    /// Workers' temperatures spread uniformly over `temperature·(1 ± spread)`.
    pub temperature_spread: f64,
    pub do_not_change_bias: f64,
}

/// Shorter, more frequent, simpler-scored and in-context candidates.
pub const SIMPLICITY_PREFERENCE: [f64; NUM_FEATURES] =
    [-0.6, 0.0, -0.3, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.5, 0.6, 0.3];

/// Meaning preservation over simplicity.
pub const FIDELITY_PREFERENCE: [f64; NUM_FEATURES] =
    [0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.5, 0.3, 0.8, 0.0, 0.8, 0.5];

impl Default for CrowdConfig {
    fn default() -> Self {
        Self {
            pool_size: 16,
            base_weights: SIMPLICITY_PREFERENCE,
            deviation: 0.8,
            temperature: 0.1,
            temperature_spread: 0.5,
            do_not_change_bias: -1.5,
        }
    }
}

impl CrowdConfig {
    /// Builds the pool; `scales` converts standardized weights to raw ones.
    pub fn build(&self, scales: &[f64; NUM_FEATURES], prefix: &str, seed: u64) -> Vec<SimWorker> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        (0..self.pool_size)
            .map(|i| {
                let mut w = [0.0; NUM_FEATURES];
                for f in 0..NUM_FEATURES {
                    let offset: f64 = StandardNormal.sample(&mut rng);
                    let base = self.base_weights[f];
                    let std = if base != 0.0 { base + self.deviation * offset } else { 0.0 };
                    w[f] = std / scales[f];
                }
                let spread = self.temperature_spread.clamp(0.0, 1.0);
                let t = if self.temperature.is_finite() && spread > 0.0 {
                    self.temperature * rng.random_range(1.0 - spread..=1.0 + spread)
                } else {
                    self.temperature
                };
                let worker_seed: u64 = rng.random();
                SimWorker::new(format!("{prefix}{:02}", i + 1), w, t, self.do_not_change_bias, worker_seed)
            })
            .collect()
    }
}

/// Per-feature standard deviations (1 where a feature is constant).
pub fn feature_scales<'a>(rows: impl IntoIterator<Item = &'a [f64; NUM_FEATURES]>) -> [f64; NUM_FEATURES] {
    let mut n = 0.0;
    let mut sum = [0.0; NUM_FEATURES];
    let mut sq = [0.0; NUM_FEATURES];
    for r in rows {
        n += 1.0;
        for f in 0..NUM_FEATURES {
            sum[f] += r[f];
            sq[f] += r[f] * r[f];
        }
    }
    let mut out = [1.0; NUM_FEATURES];
    if n < 2.0 {
        return out;
    }
    for f in 0..NUM_FEATURES {
        let mean = sum[f] / n;
        let var = (sq[f] / n - mean * mean).max(0.0);
        if var > 1e-12 {
            out[f] = var.sqrt();
        }
    }
    out
}
