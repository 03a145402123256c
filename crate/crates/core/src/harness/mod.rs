//! Experiment orchestration: configuration, seed derivation, the parallel
//! sweep, record and manifest files, reports and the self-test suite.

mod config;
mod files;
mod report;
pub mod selftest;
mod sweep;

pub use config::{step_grid, Cell, Preset, SweepConfig, FALLBACK_OUTPUT_DIR, OUTPUT_DIR_ENV};
pub use files::{read_series, write_fluctuation, write_series};
pub use report::{
    report, report_with_mode, write_report, CorrelationEntry, RegressionEntry, Report, ReportFiles, Sensitivity,
    REPORT_JSON, REPORT_TEXT,
};
pub use sweep::{
    read_records, run_one, run_sweep, sweep, valid_records, write_records, ManifestEntry, RunManifest, RunRecord,
    RunStatus, SweepOutput, MANIFEST_FILE, RECORDS_FILE,
};

pub use crate::rng::derive_seed;
