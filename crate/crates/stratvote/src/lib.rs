//! Datasets, synthetic populations, evaluation and the `stratvote` command
//! line on top of [`stratvote_core`].

pub mod cli;
pub mod data;
pub mod eval;
pub mod generate;
pub mod report;

pub use stratvote_core as core;
