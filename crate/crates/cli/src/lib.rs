//! Batch front end for the vortex solvers.

pub mod commands;
pub mod config;
pub mod dump;
pub mod report;
pub mod run;
