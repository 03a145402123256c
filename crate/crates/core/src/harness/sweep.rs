//! Parallel execution of a sweep and persistence of its records.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cell, SweepConfig};
use crate::analytics::SweepRecord;
use crate::error::{Error, Result};
use crate::hurst::{estimate_hurst, FitRange, Segmentation};
use crate::mmf::run;
use crate::rng::derive_seed;

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The book emptied too often; the run is excluded from analytics.
    Degenerate,
    /// The simulation or the Hurst fit failed for another reason.
    Failed,
}

/// One row of the record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell_index: u64,
    pub rep_index: usize,
    pub alpha_x: f64,
    pub hurst_x: f64,
    pub hurst_s: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub hurst_r: Option<f64>,
    pub r2: Option<f64>,
    pub kept_returns: usize,
    pub iaaft_iterations: usize,
    pub message: String,
    pub runtime_ms: u64,
}

impl RunRecord {
    /// Analytics view of a valid run.
    pub fn to_sweep_record(&self) -> Option<SweepRecord> {
        match (self.status, self.hurst_r, self.r2) {
            (RunStatus::Ok, Some(hurst_r), Some(r2)) if hurst_r.is_finite() => Some(SweepRecord {
                alpha_x: self.alpha_x,
                hurst_x: self.hurst_x,
                hurst_s: self.hurst_s,
                rep_index: self.rep_index,
                hurst_r,
                r2,
                seed: self.seed,
                runtime_ms: self.runtime_ms,
            }),
            _ => None,
        }
    }
}

pub fn valid_records(records: &[RunRecord]) -> Vec<SweepRecord> {
    records.iter().filter_map(RunRecord::to_sweep_record).collect()
}

/// Run repetition `rep` of `cell` and estimate the Hurst index of its returns.
pub fn run_one(config: &SweepConfig, cell: &Cell, rep: usize) -> RunRecord {
    let seed = derive_seed(config.master_seed, cell.index, rep as u64);
    let params = config.params(cell, seed);
    let started = Instant::now();
    let mut record = RunRecord {
        cell_index: cell.index,
        rep_index: rep,
        alpha_x: cell.alpha_x,
        hurst_x: cell.hurst_x,
        hurst_s: cell.hurst_s,
        seed,
        status: RunStatus::Ok,
        hurst_r: None,
        r2: None,
        kept_returns: 0,
        iaaft_iterations: 0,
        message: String::new(),
        runtime_ms: 0,
    };
    let outcome = run(&params).and_then(|res| {
        record.kept_returns = res.returns.kept;
        record.iaaft_iterations = res.diagnostics.iaaft.iterations;
        estimate_hurst(&res.returns.values, FitRange::default(), Segmentation::default())
    });
    match outcome {
        Ok(fit) => {
            record.hurst_r = Some(fit.hurst);
            record.r2 = Some(fit.r2);
        }
        Err(e) => {
            record.status = match e {
                Error::DegenerateRun { .. } => RunStatus::Degenerate,
                _ => RunStatus::Failed,
            };
            record.message = e.to_string();
        }
    }
    record.runtime_ms = started.elapsed().as_millis() as u64;
    record
}

/// Run every `(cell, rep)` of `config` on a pool of `config.workers`
/// threads. Records come back in canonical `(cell, rep)` order whatever the
/// execution interleaving.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let jobs: Vec<(Cell, usize)> = config
        .cells()
        .into_iter()
        .flat_map(|cell| (0..config.reps).map(move |rep| (cell, rep)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("cannot start {} workers: {e}", config.workers)))?;
    Ok(pool.install(|| jobs.par_iter().map(|(cell, rep)| run_one(config, cell, *rep)).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cell: u64,
    pub rep: usize,
    pub child_seed: u64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub config: SweepConfig,
    pub runs_total: usize,
    pub runs_ok: usize,
    pub runs_degenerate: usize,
    pub runs_failed: usize,
    pub per_run: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(config: &SweepConfig, records: &[RunRecord]) -> Self {
        let count = |s: RunStatus| records.iter().filter(|r| r.status == s).count();
        Self {
            config_hash: config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            runs_total: records.len(),
            runs_ok: count(RunStatus::Ok),
            runs_degenerate: count(RunStatus::Degenerate),
            runs_failed: count(RunStatus::Failed),
            per_run: records
                .iter()
                .map(|r| ManifestEntry {
                    cell: r.cell_index,
                    rep: r.rep_index,
                    child_seed: r.seed,
                    status: r.status,
                })
                .collect(),
        }
    }
}

#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub manifest: RunManifest,
    pub records_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Run the sweep and write the record file and manifest into the output
/// directory.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutput> {
    let dir = config.resolved_output_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let records = run_sweep(config)?;
    let manifest = RunManifest::new(config, &records);

    let records_path = dir.join(RECORDS_FILE);
    write_records(&records_path, &records)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse(&manifest_path, e))?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    Ok(SweepOutput {
        records,
        manifest,
        records_path,
        manifest_path,
    })
}

/// Comma-separated record file with a header row. Floats are written in
/// shortest round-trip form, so reading them back is exact.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        writer.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        let mut cfg = SweepConfig::desk();
        cfg.alpha_grid = vec![1.3];
        cfg.hurst_x_grid = vec![0.6];
        cfg.hurst_s_grid = vec![0.5, 0.7];
        cfg.reps = 2;
        cfg.n_events = 6_000;
        cfg.keep_returns = 2_000;
        cfg.iaaft_max_iter = 10;
        cfg.workers = 1;
        cfg
    }

    #[test]
    fn records_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_sweep(&tiny()).unwrap();
        assert_eq!(records.len(), 4);
        let path = dir.path().join(RECORDS_FILE);
        write_records(&path, &records).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }

    #[test]
    fn seeds_follow_derivation() {
        let cfg = tiny();
        let records = run_sweep(&cfg).unwrap();
        for r in &records {
            assert_eq!(r.seed, derive_seed(cfg.master_seed, r.cell_index, r.rep_index as u64));
        }
        let order: Vec<_> = records.iter().map(|r| (r.cell_index, r.rep_index)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn reps_zero_is_config_invalid() {
        let mut cfg = tiny();
        cfg.reps = 0;
        assert!(matches!(run_sweep(&cfg), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn failed_runs_are_excluded_from_analytics() {
        let mut r = run_sweep(&tiny()).unwrap().remove(0);
        assert!(r.to_sweep_record().is_some());
        r.status = RunStatus::Degenerate;
        assert!(r.to_sweep_record().is_none());
    }

    #[test]
    fn missing_record_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_records(&dir.path().join("nope.csv")), Err(Error::Io { .. })));
    }
}
