//! Crypto market index construction, feature engineering and feature
//! selection for studying how data-source diversity affects forecasting.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fra;
pub mod importance;
pub mod index;
pub mod indicators;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
