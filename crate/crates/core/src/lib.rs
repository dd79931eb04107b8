//! Algorithmic core of the Par4Sim adaptive simplification aid.
//!
//! Everything here is pure and allocation-only: tokenization and surface
//! statistics, paraphrase-candidate generation over in-memory resource
//! stores, an interpolated trigram language model, the 14-feature extractor,
//! LambdaMART training and NDCG evaluation, and the event-to-training-data
//! logic of the adaptive loop. File formats, persistence, HTTP and the crowd
//! simulator live in the `par4sim` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod features;
pub mod lm;
pub mod ltr;
pub mod math;
pub mod resources;
pub mod textkit;

pub use features::{FeatureVector, Scaler, NUM_FEATURES};
pub use ltr::{RankerModel, RankingGroup, TrainParams};
