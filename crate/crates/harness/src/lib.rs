//! Sweep driver, metric tables, tradeoff plots and the `divdecode` CLI.

pub mod cli;
pub mod config;
pub mod plot;
pub mod report;
pub mod sweep;

pub use config::SweepConfig;
pub use report::Row;
pub use sweep::{run_sweep, write_outputs, Threads};
