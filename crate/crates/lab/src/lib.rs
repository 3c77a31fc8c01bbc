//! Experiment front end for `otoc-core`: config files, presets, CSV and SVG
//! outputs, and the `otoc-lab` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod presets;

pub use cli::{run, Cli};
