//! Simulator of slow-aging analog data remanence on FPGA programmable
//! routes, with a time-to-digital measurement pipeline, burn/recovery
//! experiment schedules, remanence classifiers, and design asset profiling.

pub mod asset;
pub mod bti;
pub mod chart;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod recovery;
pub mod sensor;

pub use error::{Error, Result};
