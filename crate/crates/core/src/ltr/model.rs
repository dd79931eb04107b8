use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lambda::compute_lambdas;
use super::metric::ndcg_at_k;
use super::tree::{fit_tree, RegressionTree, TreeParams};
use super::RankingGroup;
use crate::features::{FeatureVector, Scaler};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LtrError {
    #[error("no graded signal: no group has two distinct relevance levels")]
    NoGradedSignal,
    #[error("invalid training parameter: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub num_trees: usize,
    pub num_leaves: usize,
    pub learning_rate: f64,
    pub sigma: f64,
    pub min_leaf_support: usize,
    pub ndcg_k: usize,
    pub leaf_epsilon: f64,
    /// Stop when validation NDCG has not improved for this many rounds.
    /// Only consulted by [`train_with_validation`].
    pub early_stopping_rounds: Option<usize>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            num_trees: 300,
            num_leaves: 10,
            learning_rate: 0.1,
            sigma: 1.0,
            min_leaf_support: 1,
            ndcg_k: 10,
            leaf_epsilon: 1e-9,
            early_stopping_rounds: None,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), LtrError> {
        let err = |m| Err(LtrError::InvalidParams(m));
        if self.num_leaves == 0 {
            return err("num_leaves must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return err("sigma must be positive");
        }
        if self.min_leaf_support == 0 {
            return err("min_leaf_support must be positive");
        }
        if self.ndcg_k == 0 {
            return err("ndcg_k must be at least 1");
        }
        if !(self.leaf_epsilon > 0.0) {
            return err("leaf_epsilon must be positive");
        }
        if self.early_stopping_rounds == Some(0) {
            return err("early_stopping_rounds must be positive");
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams { num_leaves: self.num_leaves, min_leaf_support: self.min_leaf_support, epsilon: self.leaf_epsilon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    #[default]
    Adaptive,
    Baseline,
    Personal,
}

/// A trained LambdaMART ensemble plus the scaler and provenance it was
/// trained with. Leaves already include the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub model_id: String,
    pub role: ModelRole,
    pub params: TrainParams,
    pub scaler: Scaler,
    pub trees: Vec<RegressionTree>,
    /// Iterations whose usage data went into training.
    pub trained_on: BTreeSet<u32>,
    /// HITs whose usage data went into training.
    pub trained_hits: BTreeSet<String>,
    pub worker_scope: Option<String>,
    pub training_groups: usize,
}

impl RankerModel {
    /// A model without trees: scores everything 0.
    pub fn empty(scaler: Scaler, params: TrainParams) -> Self {
        Self {
            model_id: String::from("empty"),
            role: ModelRole::Adaptive,
            params,
            scaler,
            trees: Vec::new(),
            trained_on: BTreeSet::new(),
            trained_hits: BTreeSet::new(),
            worker_scope: None,
            training_groups: 0,
        }
    }

    /// Score of an already-scaled vector: the sum of the reached leaves.
    pub fn predict_scaled(&self, scaled: &FeatureVector) -> f64 {
        self.trees.iter().map(|t| t.predict(scaled)).sum()
    }

    /// Score of a raw feature vector.
    pub fn score(&self, raw: &FeatureVector) -> f64 {
        self.predict_scaled(&self.scaler.apply(raw))
    }

    pub fn scores(&self, group: &RankingGroup) -> Vec<f64> {
        group.items.iter().map(|i| self.score(&i.features)).collect()
    }
}

/// Item permutation by descending model score, ties by ascending index.
pub fn rank(model: &RankerModel, group: &RankingGroup) -> Vec<usize> {
    order_by_scores(&model.scores(group))
}

pub(crate) fn order_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn mean_ndcg(groups: &[Prepared], scores: &[f64], k: usize) -> f64 {
    if groups.is_empty() {
        return 0.0;
    }
    let total: f64 = groups
        .iter()
        .map(|g| {
            let s = &scores[g.offset..g.offset + g.rels.len()];
            let ranked: Vec<u32> = order_by_scores(s).into_iter().map(|i| g.rels[i]).collect();
            ndcg_at_k(&ranked, k)
        })
        .sum();
    total / groups.len() as f64
}

struct Prepared {
    offset: usize,
    rels: Vec<u32>,
}

struct Flat {
    rows: Vec<FeatureVector>,
    groups: Vec<Prepared>,
}

fn flatten(groups: &[&RankingGroup], scaler: &Scaler) -> Flat {
    let mut rows = Vec::new();
    let mut prepared = Vec::with_capacity(groups.len());
    for g in groups {
        prepared.push(Prepared { offset: rows.len(), rels: g.relevances() });
        rows.extend(g.items.iter().map(|i| scaler.apply(&i.features)));
    }
    Flat { rows, groups: prepared }
}

struct Booster<'a> {
    params: &'a TrainParams,
    flat: Flat,
    scores: Vec<f64>,
    targets: Vec<f64>,
    hessians: Vec<f64>,
}

impl<'a> Booster<'a> {
    fn new(params: &'a TrainParams, flat: Flat) -> Self {
        let n = flat.rows.len();
        Self { params, flat, scores: alloc::vec![0.0; n], targets: alloc::vec![0.0; n], hessians: alloc::vec![0.0; n] }
    }

    fn round(&mut self) -> RegressionTree {
        // Groups are processed in a fixed order, so rounds are deterministic.
        for g in &self.flat.groups {
            let range = g.offset..g.offset + g.rels.len();
            let l = compute_lambdas(&g.rels, &self.scores[range.clone()], self.params.sigma, self.params.ndcg_k);
            self.targets[range.clone()].copy_from_slice(&l.lambdas);
            self.hessians[range].copy_from_slice(&l.hessians);
        }
        let mut tree = fit_tree(&self.flat.rows, &self.targets, &self.hessians, &self.params.tree_params());
        let eta = self.params.learning_rate;
        tree.map_leaves(|v| v * eta);
        for (s, row) in self.scores.iter_mut().zip(&self.flat.rows) {
            *s += tree.predict(row);
        }
        tree
    }

    fn training_ndcg(&self) -> f64 {
        mean_ndcg(&self.flat.groups, &self.scores, self.params.ndcg_k)
    }
}

fn prepare<'g>(groups: &'g [RankingGroup], params: &TrainParams) -> Result<(Vec<&'g RankingGroup>, Scaler), LtrError> {
    params.validate()?;
    let trainable: Vec<&RankingGroup> = groups.iter().filter(|g| g.is_trainable()).collect();
    if trainable.is_empty() {
        return Err(LtrError::NoGradedSignal);
    }
    let scaler = Scaler::fit(trainable.iter().flat_map(|g| g.items.iter().map(|i| &i.features)))
        .expect("trainable groups have items");
    Ok((trainable, scaler))
}

fn finish(trees: Vec<RegressionTree>, scaler: Scaler, params: &TrainParams, groups: usize) -> RankerModel {
    RankerModel { trees, training_groups: groups, ..RankerModel::empty(scaler, *params) }
}

/// Trains LambdaMART on raw-feature groups.
///
/// The scaler is fitted on the trainable groups (those with two or more
/// relevance levels); the rest are ignored.
pub fn train_lambdamart(groups: &[RankingGroup], params: &TrainParams) -> Result<RankerModel, LtrError> {
    let (trainable, scaler) = prepare(groups, params)?;
    let mut booster = Booster::new(params, flatten(&trainable, &scaler));
    let trees = (0..params.num_trees).map(|_| booster.round()).collect();
    Ok(finish(trees, scaler, params, trainable.len()))
}

/// Like [`train_lambdamart`], also returning mean training NDCG@k before
/// the first tree and after every round.
pub fn train_lambdamart_traced(groups: &[RankingGroup], params: &TrainParams) -> Result<(RankerModel, Vec<f64>), LtrError> {
    let (trainable, scaler) = prepare(groups, params)?;
    let mut booster = Booster::new(params, flatten(&trainable, &scaler));
    let mut trace = alloc::vec![booster.training_ndcg()];
    let mut trees = Vec::with_capacity(params.num_trees);
    for _ in 0..params.num_trees {
        trees.push(booster.round());
        trace.push(booster.training_ndcg());
    }
    Ok((finish(trees, scaler, params, trainable.len()), trace))
}

/// Trains with a held-out set; with `early_stopping_rounds` set, keeps the
/// prefix of trees with the best validation NDCG.
pub fn train_with_validation(
    groups: &[RankingGroup],
    validation: &[RankingGroup],
    params: &TrainParams,
) -> Result<RankerModel, LtrError> {
    let (trainable, scaler) = prepare(groups, params)?;
    let mut booster = Booster::new(params, flatten(&trainable, &scaler));
    let held: Vec<&RankingGroup> = validation.iter().filter(|g| g.is_trainable()).collect();
    let held = flatten(&held, &scaler);
    let mut held_scores = alloc::vec![0.0; held.rows.len()];
    let mut best = (mean_ndcg(&held.groups, &held_scores, params.ndcg_k), 0usize);
    let mut trees = Vec::new();
    for round in 1..=params.num_trees {
        let tree = booster.round();
        for (s, row) in held_scores.iter_mut().zip(&held.rows) {
            *s += tree.predict(row);
        }
        trees.push(tree);
        let v = mean_ndcg(&held.groups, &held_scores, params.ndcg_k);
        if v > best.0 {
            best = (v, round);
        }
        if let Some(patience) = params.early_stopping_rounds {
            if round - best.1 >= patience {
                break;
            }
        }
    }
    if params.early_stopping_rounds.is_some() {
        trees.truncate(best.1);
    }
    Ok(finish(trees, scaler, params, trainable.len()))
}
