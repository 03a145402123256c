//! Sweep configuration and its named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mmf::{ModelParams, DEFAULT_PRICE_SCALE, FULL_EVENTS, FULL_KEPT_RETURNS};
use crate::stochastic::DEFAULT_IAAFT_MAX_ITER;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MMF_OUTPUT_DIR";
/// Output directory used when neither the config nor the environment names one.
pub const FALLBACK_OUTPUT_DIR: &str = "mmf-output";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 3 x 3 Hurst grid at `alpha_x = 1.3`, 10 reps of 5e4 events.
    #[default]
    Desk,
    /// Full 10 x 10 x 14 grid, 100 reps of 2e5 events.
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::ConfigInvalid(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alpha_grid: Vec<f64>,
    pub hurst_x_grid: Vec<f64>,
    pub hurst_s_grid: Vec<f64>,
    pub reps: usize,
    pub n_events: usize,
    pub keep_returns: usize,
    pub master_seed: u64,
    pub workers: usize,
    /// Resolved against [`OUTPUT_DIR_ENV`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_price_scale")]
    pub price_scale: f64,
    #[serde(default = "default_iaaft_max_iter")]
    pub iaaft_max_iter: usize,
}

fn default_price_scale() -> f64 {
    DEFAULT_PRICE_SCALE
}

fn default_iaaft_max_iter() -> usize {
    DEFAULT_IAAFT_MAX_ITER
}

/// `start, start + step, ...` up to `end` inclusive, rounded to 1e-10 so the
/// grid values print cleanly.
pub fn step_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

impl SweepConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                alpha_grid: vec![1.3],
                hurst_x_grid: vec![0.5, 0.7, 0.9],
                hurst_s_grid: vec![0.5, 0.7, 0.9],
                reps: 10,
                n_events: 50_000,
                keep_returns: 10_000,
                master_seed: 20_130_101,
                workers: default_workers(),
                output_dir: None,
                price_scale: DEFAULT_PRICE_SCALE,
                iaaft_max_iter: DEFAULT_IAAFT_MAX_ITER,
            },
            Preset::Full => Self {
                alpha_grid: step_grid(1.0, 1.65, 0.05),
                hurst_x_grid: step_grid(0.5, 0.95, 0.05),
                hurst_s_grid: step_grid(0.5, 0.95, 0.05),
                reps: 100,
                n_events: FULL_EVENTS,
                keep_returns: FULL_KEPT_RETURNS,
                master_seed: 20_130_101,
                workers: default_workers(),
                output_dir: None,
                price_scale: DEFAULT_PRICE_SCALE,
                iaaft_max_iter: DEFAULT_IAAFT_MAX_ITER,
            },
        }
    }

    pub fn desk() -> Self {
        Self::preset(Preset::Desk)
    }

    pub fn full() -> Self {
        Self::preset(Preset::Full)
    }

    /// Parse a TOML document. An optional top-level `preset` key selects
    /// the base profile (default `desk`); every other key overrides it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigInvalid(e.message().to_string()))?;
        let preset = match table.remove("preset") {
            None => Preset::Desk,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::ConfigInvalid(format!("preset must be a string, got {other}"))),
        };
        let base = toml::Table::try_from(Self::preset(preset))
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let mut merged = base;
        for (k, v) in table {
            if !merged.contains_key(&k) && k != "output_dir" {
                return Err(Error::ConfigInvalid(format!("unknown key {k:?}")));
            }
            merged.insert(k, v);
        }
        let config: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigInvalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::ConfigInvalid(msg) => Error::ConfigInvalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        for (name, grid) in [
            ("alpha_grid", &self.alpha_grid),
            ("hurst_x_grid", &self.hurst_x_grid),
            ("hurst_s_grid", &self.hurst_s_grid),
        ] {
            if grid.is_empty() {
                return bad(format!("{name} is empty"));
            }
            let mut sorted = grid.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() != grid.len() {
                return bad(format!("{name} has duplicate values"));
            }
        }
        if self.keep_returns == 0 || self.keep_returns > self.n_events {
            return bad(format!(
                "keep_returns must lie in [1, n_events = {}], got {}",
                self.n_events, self.keep_returns
            ));
        }
        // Every cell must yield valid model parameters.
        for cell in self.cells() {
            self.params(&cell, 0)
                .validate()
                .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Cells in canonical order: `alpha_x` outermost, then `H_s`, then `H_x`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.alpha_grid.len() * self.hurst_s_grid.len() * self.hurst_x_grid.len());
        for &alpha_x in &self.alpha_grid {
            for &hurst_s in &self.hurst_s_grid {
                for &hurst_x in &self.hurst_x_grid {
                    out.push(Cell {
                        index: out.len() as u64,
                        alpha_x,
                        hurst_x,
                        hurst_s,
                    });
                }
            }
        }
        out
    }

    pub fn total_runs(&self) -> usize {
        self.alpha_grid.len() * self.hurst_x_grid.len() * self.hurst_s_grid.len() * self.reps
    }

    /// Model parameters of one run.
    pub fn params(&self, cell: &Cell, seed: u64) -> ModelParams {
        let mut p = ModelParams::new(cell.alpha_x, cell.hurst_x, cell.hurst_s, self.n_events, seed)
            .with_kept_returns(self.keep_returns);
        p.price_scale = self.price_scale;
        p.iaaft_max_iter = self.iaaft_max_iter;
        p
    }

    /// Output directory: the configured one, else `$MMF_OUTPUT_DIR`, else
    /// `./mmf-output`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }

    /// SHA-256 over the fields that determine the records; worker count and
    /// output location are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.workers = 1;
        canonical.output_dir = None;
        let text = toml::to_string(&canonical).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: u64,
    pub alpha_x: f64,
    pub hurst_x: f64,
    pub hurst_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_profiles() {
        let full = SweepConfig::full();
        assert_eq!(full.alpha_grid.len(), 14);
        assert_eq!(full.alpha_grid[0], 1.0);
        assert_eq!(full.alpha_grid[13], 1.65);
        assert_eq!(full.hurst_x_grid.len(), 10);
        assert_eq!(full.hurst_s_grid[9], 0.95);
        assert_eq!(full.total_runs(), 1400 * 100);
        assert!(full.validate().is_ok());

        let desk = SweepConfig::desk();
        assert_eq!(desk.cells().len(), 9);
        assert_eq!(desk.total_runs(), 90);
        assert!(desk.validate().is_ok());
    }

    #[test]
    fn toml_overrides_preset() {
        let cfg = SweepConfig::from_toml_str(
            "preset = \"full\"\nreps = 3\nalpha_grid = [1.3]\nworkers = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.alpha_grid, vec![1.3]);
        assert_eq!(cfg.n_events, FULL_EVENTS);
        assert_eq!(cfg.hurst_x_grid.len(), 10);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = SweepConfig::desk();
        let back = SweepConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(SweepConfig::from_toml_str("reps = 0"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(SweepConfig::from_toml_str("workers = 0"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(SweepConfig::from_toml_str("hurst_s_grid = [1.2]"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(SweepConfig::from_toml_str("hurst_s_grid = []"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(SweepConfig::from_toml_str("bogus = 1"), Err(Error::ConfigInvalid(_))));
        assert!(matches!(SweepConfig::from_toml_str("preset = \"huge\""), Err(Error::ConfigInvalid(_))));
        assert!(matches!(
            SweepConfig::from_toml_str("keep_returns = 60000"),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = SweepConfig::desk();
        let mut b = a.clone();
        b.workers = 8;
        b.output_dir = Some("/tmp/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn cells_are_canonically_ordered() {
        let mut cfg = SweepConfig::desk();
        cfg.alpha_grid = vec![1.0, 1.6];
        let cells = cfg.cells();
        assert_eq!(cells.len(), 18);
        assert_eq!((cells[0].alpha_x, cells[0].hurst_s, cells[0].hurst_x), (1.0, 0.5, 0.5));
        assert_eq!((cells[1].alpha_x, cells[1].hurst_s, cells[1].hurst_x), (1.0, 0.5, 0.7));
        assert_eq!((cells[3].alpha_x, cells[3].hurst_s, cells[3].hurst_x), (1.0, 0.7, 0.5));
        assert_eq!(cells[9].alpha_x, 1.6);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i as u64));
    }
}
