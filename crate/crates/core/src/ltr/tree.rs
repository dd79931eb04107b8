use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, NUM_FEATURES};

/// A tree node. Split features are 1-based (the LETOR index); samples with
/// `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self { nodes: alloc::vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x.0[feature - 1] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn map_leaves(&mut self, mut f: impl FnMut(f64) -> f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value = f(*value);
            }
        }
    }

    /// Structural validity: in-range children and split features, every node
    /// reachable from the root exactly once.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = alloc::vec![false; self.nodes.len()];
        let mut stack = alloc::vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return false;
            }
            seen[i] = true;
            if let Node::Split { feature, left, right, threshold } = self.nodes[i] {
                if !(1..=NUM_FEATURES).contains(&feature) || !threshold.is_finite() {
                    return false;
                }
                stack.push(left);
                stack.push(right);
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub num_leaves: usize,
    pub min_leaf_support: usize,
    /// Added to the hessian sum in the Newton leaf value.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Open {
    node: usize,
    // Sample indices sorted by each feature's value (ties by index).
    sorted: Vec<Vec<u32>>,
    best: Option<Split>,
}

fn best_split(sorted: &[Vec<u32>], rows: &[FeatureVector], targets: &[f64], min_support: usize) -> Option<Split> {
    let n = sorted[0].len();
    let min_support = min_support.max(1);
    if n < 2 * min_support {
        return None;
    }
    let total: f64 = sorted[0].iter().map(|&i| targets[i as usize]).sum();
    let base = total * total / n as f64;
    let mut best: Option<Split> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            let i = order[pos] as usize;
            left_sum += targets[i];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_support || n_right < min_support {
                continue;
            }
            let a = rows[i].0[f];
            let b = rows[order[pos + 1] as usize].0[f];
            if a >= b {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - base;
            if gain > best.map_or(0.0, |s| s.gain) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Split { gain, feature: f, threshold });
            }
        }
    }
    best
}

fn newton_value(samples: &[u32], targets: &[f64], hessians: &[f64], epsilon: f64) -> f64 {
    let (mut t, mut h) = (0.0, 0.0);
    for &i in samples {
        t += targets[i as usize];
        h += hessians[i as usize];
    }
    t / (h + epsilon)
}

/// Fits a least-squares regression tree, grown best-first up to
/// `num_leaves` leaves. Leaves hold the Newton step
/// `Σ targets / (Σ hessians + ε)`.
pub fn fit_tree(rows: &[FeatureVector], targets: &[f64], hessians: &[f64], params: &TreeParams) -> RegressionTree {
    assert_eq!(rows.len(), targets.len());
    assert_eq!(rows.len(), hessians.len());
    if rows.is_empty() {
        return RegressionTree::leaf(0.0);
    }
    let n = rows.len();
    let sorted: Vec<Vec<u32>> = (0..NUM_FEATURES)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| rows[a as usize].0[f].total_cmp(&rows[b as usize].0[f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut nodes = alloc::vec![Node::Leaf { value: 0.0 }];
    let best = best_split(&sorted, rows, targets, params.min_leaf_support);
    let mut open = alloc::vec![Open { node: 0, sorted, best }];
    let mut closed: Vec<Open> = Vec::new();
    let mut goes_left = alloc::vec![false; n];

    while open.len() + closed.len() < params.num_leaves.max(1) {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.best.map(|s| (i, s.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((i, g)),
            });
        let Some((idx, _)) = pick else { break };
        let leaf = open.remove(idx);
        let split = leaf.best.expect("picked leaf has a split");
        for &i in &leaf.sorted[0] {
            goes_left[i as usize] = rows[i as usize].0[split.feature] <= split.threshold;
        }
        let (mut left, mut right) = (Vec::with_capacity(NUM_FEATURES), Vec::with_capacity(NUM_FEATURES));
        for order in leaf.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = order.into_iter().partition(|&i| goes_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[leaf.node] = Node::Split { feature: split.feature + 1, threshold: split.threshold, left: li, right: ri };
        for (node, sorted) in [(li, left), (ri, right)] {
            let best = best_split(&sorted, rows, targets, params.min_leaf_support);
            let o = Open { node, sorted, best };
            if o.best.is_some() {
                open.push(o);
            } else {
                closed.push(o);
            }
        }
    }
    for o in open.iter().chain(&closed) {
        nodes[o.node] = Node::Leaf { value: newton_value(&o.sorted[0], targets, hessians, params.epsilon) };
    }
    RegressionTree { nodes }
}
