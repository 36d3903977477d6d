//! Scenario configuration, the builtin models, probes and the time loop.

mod builtin;
mod config;
mod run;

pub use builtin::{builtin_scenario, stimulate_neighbors, BUILTIN_NAMES, CENTER_AXON, NEIGHBOR_AXON};
pub use config::*;
pub use run::{compare_runs, time_loop, Comparison, Observer, Prepared, ProbeRecord, ProbeRecorder, ProbeSet, RunSummary};
