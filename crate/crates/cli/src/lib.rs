//! Library half of the `sparsebench` command: experiment configs, the
//! `run` pipeline and the error type that maps to exit codes.

pub mod config;
pub mod error;
pub mod runner;
