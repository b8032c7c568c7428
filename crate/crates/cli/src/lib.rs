//! Batch driver around `pcrobust-core`: corrupt a KITTI-layout dataset,
//! denoise it, score detector outputs and format robustness reports.

pub mod args;
pub mod corrupt;
pub mod denoise;
pub mod error;
pub mod evaluate;
pub mod fsutil;
pub mod manifest;
pub mod report;

pub use error::{CliError, CliResult};
pub use manifest::{Manifest, Settings};
