//! Experiment driver around the [`fiol`] crate: single benchmark runs and
//! step-size sweeps over synthetic or file-based streams, reduced to stable
//! CSV artifacts.  The `fiol-bench` binary is a thin flag-parsing shell over
//! these modules.

pub mod config;
pub mod csv;
pub mod runner;
pub mod sweep;
