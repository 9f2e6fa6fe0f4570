//! Experiment orchestration, statistics, persistence and the acceptance suite
//! for the truncated REM Metropolis dynamics.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod output;
pub mod stats;
