//! Library surface of the scenario runner, used by the binary and the
//! acceptance suite.

pub mod config;
pub mod reproduce;
pub mod runner;
pub mod sweep;
pub mod trace;
