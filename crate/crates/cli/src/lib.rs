//! Library half of the `gleak` command: configuration, the per-seed
//! pipeline, on-disk artifacts and reports.

pub mod artifacts;
pub mod config;
pub mod pipeline;
pub mod report;
