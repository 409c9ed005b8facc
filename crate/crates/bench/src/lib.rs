//! Desk-scale evaluation harness: query sampling, timed runs of each solver
//! path, censored summaries, cactus data and normalized anytime curves.

pub mod config;
pub mod error;
pub mod queries;
pub mod records;
pub mod run;
pub mod stats;

pub use config::{BenchConfig, Method};
pub use error::{BenchError, Result};
pub use queries::{sample_queries, Query};
pub use records::{BenchRecord, RunTrace, SummaryRow};
pub use run::{load_dataset_csv, run_benchmark, run_benchmark_file, BenchOutcome};
pub use stats::{censored_median, censored_quartiles, normalized_anytime_error};
