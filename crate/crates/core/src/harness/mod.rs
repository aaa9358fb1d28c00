//! Experiment configuration, the seeded Monte-Carlo runner, file formats
//! and CSV output behind the command-line tool.

pub mod config;
pub mod fileio;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, SweepPoint};
pub use fileio::{pack_bits, unpack_bits, ComplexMatrix};
pub use runner::{
    compare_se, load_or_build_tables, outage_rows, predict_point, run_point, run_trials, simulate,
    summarize, Experiment, OutageRow, PointSummary, PredictionRow, RunRecord, SeComparisonRow,
    SimulationOutput,
};
