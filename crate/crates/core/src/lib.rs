//! Organic-matter regression from multispectral image tiles with causal
//! (MMD) and location-contrastive regularization, plus the experiment
//! harness and a synthetic data generator.

pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod nn;
pub mod objectives;
pub mod seed;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
