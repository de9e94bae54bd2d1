//! Library surface of the experiment runner: config parsing, experiment
//! execution, and results handling. The `cpsim` binary is a thin wrapper.

pub mod config;
pub mod experiments;
pub mod results;
