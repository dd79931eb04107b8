use alloc::vec::Vec;

use super::metric::{ideal_dcg_at_k, ranking_positions, swap_delta};
use crate::math::logistic_neg;

/// Lambda gradients and second-order weights for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas {
    pub lambdas: Vec<f64>,
    pub hessians: Vec<f64>,
}

// Pair contributions are accumulated on a 2^-40 grid so that the +x / −x
// halves of every pair cancel exactly and each group's lambdas sum to 0.
const FIXED_SCALE: f64 = (1u64 << 40) as f64;

/// Magnitude `σ·ρ·Δ` and hessian weight `σ²·ρ(1−ρ)·Δ` of one ordered pair
/// (`i` more relevant than `j`), with `ρ = 1 / (1 + e^{σ(s_i − s_j)})`.
pub fn pair_lambda(s_i: f64, s_j: f64, sigma: f64, delta: f64) -> (f64, f64) {
    let rho = logistic_neg(sigma * (s_i - s_j));
    (sigma * rho * delta, sigma * sigma * rho * (1.0 - rho) * delta)
}

/// LambdaMART gradients for one group at the current scores.
///
/// Positive lambdas push an item up. Groups with a single relevance level
/// produce all zeros.
pub fn compute_lambdas(relevances: &[u32], scores: &[f64], sigma: f64, k: usize) -> Lambdas {
    let n = relevances.len();
    let mut fixed = alloc::vec![0i64; n];
    let mut hessians = alloc::vec![0.0; n];
    let ideal = ideal_dcg_at_k(relevances, k);
    if ideal > 0.0 {
        let pos = ranking_positions(scores);
        for i in 0..n {
            for j in 0..n {
                if relevances[i] <= relevances[j] {
                    continue;
                }
                let delta = swap_delta(relevances[i], relevances[j], pos[i], pos[j], k, ideal);
                if delta == 0.0 {
                    continue;
                }
                let (lambda, hess) = pair_lambda(scores[i], scores[j], sigma, delta);
                let q = libm::round(lambda * FIXED_SCALE) as i64;
                fixed[i] += q;
                fixed[j] -= q;
                hessians[i] += hess;
                hessians[j] += hess;
            }
        }
    }
    Lambdas { lambdas: fixed.into_iter().map(|q| q as f64 / FIXED_SCALE).collect(), hessians }
}
