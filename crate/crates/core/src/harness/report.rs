//! Reduction of a record file to tables, correlations and regressions.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{valid_records, RunRecord, RunStatus};
use crate::analytics::{
    cell_stats, ols_with_mode, pearson, sensitivity, CellStats, CellTable, Correlation, FitMode, ModelForm,
    RegressionReport, SweepRecord, Variable,
};
use crate::error::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

/// A fitted regression, or the reason it could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEntry {
    pub form: ModelForm,
    /// `alpha_x` the fit is restricted to, for the two-variable forms.
    pub alpha_x: Option<f64>,
    pub report: Option<RegressionReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub variable: Variable,
    pub correlation: Option<Correlation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub form: ModelForm,
    pub variable: Variable,
    pub delta: f64,
    pub delta_hurst_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs_total: usize,
    pub runs_valid: usize,
    pub runs_degenerate: usize,
    pub runs_failed: usize,
    pub fit_mode: FitMode,
    pub cells: Vec<CellStats>,
    /// Cells left out of the tables for having fewer than two valid runs.
    pub thin_cells: usize,
    pub tables: Vec<CellTable>,
    pub correlations: Vec<CorrelationEntry>,
    pub regressions: Vec<RegressionEntry>,
    pub sensitivities: Vec<Sensitivity>,
}

impl Report {
    pub fn regression(&self, form: ModelForm, alpha_x: Option<f64>) -> Option<&RegressionReport> {
        self.regressions
            .iter()
            .find(|e| e.form == form && e.alpha_x == alpha_x)
            .and_then(|e| e.report.as_ref())
    }

    pub fn correlation(&self, variable: Variable) -> Option<&Correlation> {
        self.correlations
            .iter()
            .find(|c| c.variable == variable)
            .and_then(|c| c.correlation.as_ref())
    }

    pub fn cell(&self, alpha_x: f64, hurst_x: f64, hurst_s: f64) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.alpha_x == alpha_x && c.hurst_x == hurst_x && c.hurst_s == hurst_s)
    }
}

/// Build the report from the rows of a record file.
pub fn report(records: &[RunRecord]) -> Result<Report> {
    report_with_mode(records, FitMode::PerRun)
}

pub fn report_with_mode(records: &[RunRecord], mode: FitMode) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::EmptyInput("record file has no rows".into()));
    }
    let valid = valid_records(records);
    if valid.is_empty() {
        return Err(Error::EmptyInput("record file has no valid runs".into()));
    }
    let count = |s: RunStatus| records.iter().filter(|r| r.status == s).count();

    // Cells with a single valid run cannot carry a standard deviation.
    let mut per_cell: BTreeMap<(u64, u64, u64), Vec<SweepRecord>> = BTreeMap::new();
    for r in &valid {
        per_cell
            .entry((r.alpha_x.to_bits(), r.hurst_s.to_bits(), r.hurst_x.to_bits()))
            .or_default()
            .push(*r);
    }
    let thin_cells = per_cell.values().filter(|v| v.len() < 2).count();
    let tabulated: Vec<SweepRecord> = per_cell.into_values().filter(|v| v.len() >= 2).flatten().collect();
    let cells = if tabulated.is_empty() { Vec::new() } else { cell_stats(&tabulated)? };
    let tables = CellTable::from_stats(&cells);

    let correlations = Variable::ALL
        .into_iter()
        .map(|variable| match pearson(&valid, variable) {
            Ok(c) => CorrelationEntry {
                variable,
                correlation: Some(c),
                error: None,
            },
            Err(e) => CorrelationEntry {
                variable,
                correlation: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut alphas: Vec<f64> = valid.iter().map(|r| r.alpha_x).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut regressions = Vec::new();
    let mut fit = |form: ModelForm, alpha_x: Option<f64>| {
        let subset: Vec<SweepRecord> = match alpha_x {
            Some(a) => valid.iter().filter(|r| r.alpha_x == a).copied().collect(),
            None => valid.clone(),
        };
        let (report, error) = match ols_with_mode(&subset, form, mode) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        regressions.push(RegressionEntry {
            form,
            alpha_x,
            report,
            error,
        });
    };
    for &a in &alphas {
        fit(ModelForm::Linear2, Some(a));
        fit(ModelForm::CubicS2, Some(a));
    }
    fit(ModelForm::Linear3, None);
    fit(ModelForm::CubicS3, None);

    let mut sensitivities = Vec::new();
    for entry in &regressions {
        let Some(rep) = &entry.report else { continue };
        if !matches!(rep.form, ModelForm::Linear3) && !(rep.form == ModelForm::Linear2 && alphas.len() == 1) {
            continue;
        }
        for variable in Variable::ALL {
            if let Ok(d) = sensitivity(rep, variable, 1.0) {
                sensitivities.push(Sensitivity {
                    form: rep.form,
                    variable,
                    delta: 1.0,
                    delta_hurst_r: d,
                });
            }
        }
    }

    Ok(Report {
        runs_total: records.len(),
        runs_valid: valid.len(),
        runs_degenerate: count(RunStatus::Degenerate),
        runs_failed: count(RunStatus::Failed),
        fit_mode: mode,
        cells,
        thin_cells,
        tables,
        correlations,
        regressions,
        sensitivities,
    })
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "runs: {} total, {} valid, {} degenerate, {} failed",
            self.runs_total, self.runs_valid, self.runs_degenerate, self.runs_failed
        )?;
        if self.thin_cells > 0 {
            writeln!(f, "cells with fewer than two valid runs: {}", self.thin_cells)?;
        }
        writeln!(f)?;
        for t in &self.tables {
            writeln!(f, "{t}")?;
        }
        writeln!(f, "Pearson correlations with H_r")?;
        for c in &self.correlations {
            match (&c.correlation, &c.error) {
                (Some(c), _) => writeln!(
                    f,
                    "  {:<8} rho = {:>7.4}  p = {:.2e}  n = {}",
                    c.variable, c.rho, c.p_value, c.n
                )?,
                (None, e) => writeln!(f, "  {:<8} unavailable: {}", c.variable, e.as_deref().unwrap_or(""))?,
            }
        }
        writeln!(f)?;
        for e in &self.regressions {
            if let Some(a) = e.alpha_x {
                write!(f, "[alpha_x = {a:.2}] ")?;
            }
            match (&e.report, &e.error) {
                (Some(r), _) => writeln!(f, "{r}")?,
                (None, err) => writeln!(f, "{}: unavailable: {}\n", e.form, err.as_deref().unwrap_or(""))?,
            }
        }
        if !self.sensitivities.is_empty() {
            writeln!(f, "Sensitivities (unit change)")?;
            for s in &self.sensitivities {
                writeln!(f, "  {:<8} {:<8} dH_r = {:>7.4}", s.form, s.variable, s.delta_hurst_r)?;
            }
        }
        Ok(())
    }
}

/// Paths of a written report bundle.
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub text: PathBuf,
}

pub fn write_report(report: &Report, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(REPORT_JSON);
    let body = serde_json::to_string_pretty(report).map_err(|e| Error::parse(&json, e))?;
    fs::write(&json, body + "\n").map_err(|e| Error::io(&json, e))?;
    let text = dir.join(REPORT_TEXT);
    let mut out = String::new();
    let _ = write!(out, "{report}");
    fs::write(&text, out).map_err(|e| Error::io(&text, e))?;
    Ok(ReportFiles { json, text })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(noise: f64) -> Vec<RunRecord> {
        let hs = [0.5, 0.6, 0.7, 0.8, 0.9];
        let mut out = Vec::new();
        let mut cell = 0;
        for &s in &hs {
            for &x in &hs {
                for rep in 0..2 {
                    let jitter = if rep == 0 { -noise } else { noise };
                    out.push(RunRecord {
                        cell_index: cell,
                        rep_index: rep,
                        alpha_x: 1.3,
                        hurst_x: x,
                        hurst_s: s,
                        seed: 0,
                        status: RunStatus::Ok,
                        hurst_r: Some(0.23 - 0.08 * x + 0.52 * s + jitter),
                        r2: Some(1.0),
                        kept_returns: 0,
                        iaaft_iterations: 0,
                        message: String::new(),
                        runtime_ms: 0,
                    });
                }
                cell += 1;
            }
        }
        out
    }

    #[test]
    fn noiseless_records_reproduce_coefficients() {
        let rep = report(&synthetic(0.0)).unwrap();
        let lin = rep.regression(ModelForm::Linear2, Some(1.3)).unwrap();
        for (got, want) in lin.coefficients().iter().zip([0.23, -0.08, 0.52]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert_eq!(rep.tables.len(), 1);
        assert_eq!(rep.cells.len(), 25);
        // single alpha: no alpha correlation, no trivariate fit
        assert!(rep.correlation(Variable::AlphaX).is_none());
        assert!(rep.regression(ModelForm::Linear3, None).is_none());
        assert!(rep.correlation(Variable::HurstS).unwrap().rho > 0.9);
    }

    #[test]
    fn degenerate_runs_are_counted_not_used() {
        let mut recs = synthetic(0.01);
        recs[0].status = RunStatus::Degenerate;
        recs[0].hurst_r = None;
        let rep = report(&recs).unwrap();
        assert_eq!(rep.runs_degenerate, 1);
        assert_eq!(rep.runs_valid, 49);
        assert_eq!(rep.thin_cells, 1);
        assert_eq!(rep.cells.len(), 24);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(report(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn bundle_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let rep = report(&synthetic(0.01)).unwrap();
        let files = write_report(&rep, dir.path()).unwrap();
        let back: Report = serde_json::from_str(&fs::read_to_string(files.json).unwrap()).unwrap();
        assert_eq!(back.cells, rep.cells);
        assert!(fs::read_to_string(files.text).unwrap().contains("0.45(1)"));
    }
}
