use alloc::vec::Vec;

use crate::math::{exp2, log2};

#[inline]
fn gain(rel: u32) -> f64 {
    exp2(rel as f64) - 1.0
}

/// Discount of 1-based position `p`, zero past the truncation point.
#[inline]
fn discount(p: usize, k: usize) -> f64 {
    if p <= k {
        1.0 / log2(p as f64 + 1.0)
    } else {
        0.0
    }
}

/// `Σ_{p ≤ k} (2^rel_p − 1) / log2(p + 1)` over relevances in ranked order.
pub fn dcg_at_k(ranked: &[u32], k: usize) -> f64 {
    ranked.iter().take(k).enumerate().map(|(i, &r)| gain(r) * discount(i + 1, k)).sum()
}

pub fn ideal_dcg_at_k(relevances: &[u32], k: usize) -> f64 {
    let mut sorted = relevances.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_k(&sorted, k)
}

/// NDCG@k; 0 when the ideal DCG is 0.
pub fn ndcg_at_k(ranked: &[u32], k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(ranked, k);
    if ideal == 0.0 {
        return 0.0;
    }
    dcg_at_k(ranked, k) / ideal
}

/// 1-based rank of every item when sorted by descending score, ties broken
/// by ascending item index.
pub fn ranking_positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut pos = alloc::vec![0; scores.len()];
    for (rank, &i) in order.iter().enumerate() {
        pos[i] = rank + 1;
    }
    pos
}

pub(crate) fn swap_delta(rel_i: u32, rel_j: u32, pos_i: usize, pos_j: usize, k: usize, ideal: f64) -> f64 {
    if ideal == 0.0 {
        return 0.0;
    }
    ((gain(rel_i) - gain(rel_j)) * (discount(pos_i, k) - discount(pos_j, k))).abs() / ideal
}

/// |ΔNDCG@k| from swapping items `i` and `j` in the ranking induced by
/// `scores`.
pub fn delta_ndcg(relevances: &[u32], scores: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let pos = ranking_positions(scores);
    let ideal = ideal_dcg_at_k(relevances, k);
    swap_delta(relevances[i], relevances[j], pos[i], pos[j], k, ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[3, 2, 0], 10), 1.0);
        let dcg = 3.0 + 7.0 / log2(3.0);
        assert!((dcg - 7.41651).abs() < 1e-5);
        assert!((ndcg_at_k(&[2, 3, 0], 10) - 0.8340).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[0, 0, 0], 10), 0.0);
        assert_eq!(ndcg_at_k(&[], 10), 0.0);
    }

    #[test]
    fn truncation() {
        assert_eq!(ndcg_at_k(&[0, 1], 1), 0.0);
        assert_eq!(ndcg_at_k(&[1, 0], 1), 1.0);
    }

    #[test]
    fn delta_examples() {
        let d = delta_ndcg(&[1, 0], &[0.0, 0.0], 0, 1, 10);
        assert!((d - (1.0 - 1.0 / log2(3.0))).abs() < 1e-15);
        assert!((d - 0.3691).abs() < 1e-4);
        assert_eq!(delta_ndcg(&[2, 2, 1], &[0.3, 0.2, 0.1], 0, 1, 10), 0.0);
        // Both items ranked past k.
        assert_eq!(delta_ndcg(&[1, 0, 3, 2], &[4.0, 3.0, 2.0, 1.0], 2, 3, 2), 0.0);
    }

    #[test]
    fn positions_break_ties_by_index() {
        assert_eq!(ranking_positions(&[0.0, 1.0, 0.0, 1.0]), vec![3, 1, 4, 2]);
    }
}
