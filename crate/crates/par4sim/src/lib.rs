//! Std companion of `par4sim-core`: file formats, the candidate pipeline
//! over loaded resources, the HTTP service and the simulated crowd.

pub mod config;
pub mod formats;
pub mod hit;
pub mod pipeline;
pub mod service;
pub mod sim;
