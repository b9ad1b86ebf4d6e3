//! Experiment runner for the `mopg` crate: declarative problem files, versioned results
//! documents, CSV traces, SVG plots and the benchmark suite.

pub mod commands;
pub mod plot;
pub mod problem_file;
pub mod results;
pub mod trace_csv;
