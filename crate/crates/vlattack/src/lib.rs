//! File formats, checkpoints, parallel evaluation and the command-line
//! interface on top of `vlattack-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod parallel;
pub mod report;

pub use error::{FormatError, Result};
