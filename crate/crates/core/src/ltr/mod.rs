//! Learning to rank: NDCG, lambda gradients, regression trees and LambdaMART.

mod lambda;
mod metric;
mod model;
mod tree;

pub use lambda::{compute_lambdas, pair_lambda, Lambdas};
pub use metric::{dcg_at_k, delta_ndcg, ideal_dcg_at_k, ndcg_at_k, ranking_positions};
pub use model::{
    rank, train_lambdamart, train_lambdamart_traced, train_with_validation, LtrError, ModelRole,
    RankerModel, TrainParams,
};
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub features: FeatureVector,
    pub relevance: u32,
    pub item_id: String,
}

/// One query: the candidates of a single CP occurrence with graded labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingGroup {
    pub query_id: String,
    pub items: Vec<RankedItem>,
}

impl RankingGroup {
    pub fn relevances(&self) -> Vec<u32> {
        self.items.iter().map(|i| i.relevance).collect()
    }

    /// At least two distinct relevance levels, i.e. something to learn from.
    pub fn is_trainable(&self) -> bool {
        let mut it = self.items.iter().map(|i| i.relevance);
        match it.next() {
            Some(first) => it.any(|r| r != first),
            None => false,
        }
    }

    /// NDCG@k of the items in their stored order.
    pub fn stored_order_ndcg(&self, k: usize) -> f64 {
        ndcg_at_k(&self.relevances(), k)
    }
}
