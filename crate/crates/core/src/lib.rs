//! Planning and analysis suite for G-GPU accelerators.
//!
//! The crate generates reference designs, runs static timing analysis,
//! applies memory-division and pipeline transforms to reach frequency
//! targets, estimates PPA, simulates SIMT execution and reports speedups.

pub mod analysis;
pub mod calibration;
pub mod design;
pub mod error;
pub mod planner;
pub mod sim;
pub mod tech;
pub mod timing;
pub mod transforms;

pub use error::{Error, Result};
