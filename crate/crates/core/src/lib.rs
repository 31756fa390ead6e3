pub mod aggregates;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod desia;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
