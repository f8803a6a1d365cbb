//! Experiment harness for the streaming subspace tracker: configuration
//! files, CSV data formats, experiment drivers, and a timing harness. The
//! `grouse` binary is a thin command-line wrapper over this library.

pub mod bench;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiments;

pub use bench::{bench_linear_scaling, BenchPoint};
pub use config::{ExperimentKind, ExperimentSpec, ScheduleKind};
pub use csvio::{
    read_entries, read_matrix, read_stream, read_telemetry, write_entries, write_matrix,
    write_stream, write_telemetry, TelemetryRow,
};
pub use error::{CliError, Result};
pub use experiments::{
    complete_entries, planted_matrix, resolve_out_dir, run_experiment, sample_entries, RunSummary,
};
