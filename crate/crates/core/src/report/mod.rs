//! Run configuration and result files.

mod config;
mod output;

pub use config::{parse_config, RunConfig};
pub use output::{
    emit_results, MANIFEST_FILE, PER_COHORT_FILE, PER_COHORT_HEADER, RESOLVED_CONFIG_FILE, SUMMARY_FILE,
    SUMMARY_HEADER,
};
