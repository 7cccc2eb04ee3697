//! Multi-seed trial runner, aggregation and report files.

mod config;
mod report;
mod trial;

pub use config::{format_seeds, parse_seeds, RunConfig, KEYS};
pub use report::{
    aggregate, emit, format_table, mean_and_se, run_compare, Cell, SeedResult, Summary,
    TRACE_HEADER,
};
pub use trial::{
    run_seeds, run_seeds_in, run_trial, run_trial_in, StepRow, TrialRecord, FEEDBACK_STREAM,
    POLICY_STREAM,
};
