//! Diffusion over dynamic contact networks with direct and delayed indirect
//! transmission links.

pub mod config;
pub mod epidemic;
pub mod error;
pub mod exposure;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
