//! A simulated crowd that drives the service end to end.
//!
//! Workers are stand-ins for people: each has a hidden linear utility over
//! the ranker's raw features and picks by softmax.

mod campaign;
mod stats;
mod world;
mod worker;

pub use campaign::{
    contract_violation, run_campaign, run_personalization, write_personal_csv, Campaign, PersonalResult, SimConfig,
    PERSONAL_HEADER,
};
pub use stats::{ols_slope_test, SlopeTest};
pub use world::{CpEntry, World, WordInfo, WorldConfig};
pub use worker::{feature_scales, CrowdConfig, Decision, SimWorker, FIDELITY_PREFERENCE, SIMPLICITY_PREFERENCE};
