//! Hierarchical reinforcement learning gym for scripted desktop GUI tasks.

pub mod action_space;
pub mod agents;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod reward_engine;
pub mod state_encoder;
pub mod task_suite;

pub use error::{Error, Result};
