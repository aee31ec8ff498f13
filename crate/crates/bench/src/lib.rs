//! Experiment runner for the rulepomdp planners: config files, seeded
//! episode sweeps, CSV output and summaries, and the trace-to-rules
//! pipeline.

pub mod config;
pub mod learn;
pub mod run;
pub mod summary;
