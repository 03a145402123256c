//! Statistical reduction of sweep records.
//!
//! Per-cell means and standard deviations of the return Hurst index, pooled
//! Pearson correlations against each order-flow parameter, and ordinary
//! least squares fits of the linear and cubic-in-`H_s` model families.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Significance level used when flagging coefficients and correlations.
pub const SIGNIFICANCE_LEVEL: f64 = 0.001;

/// Outcome of one valid run: the order-flow parameters and the estimated
/// Hurst index of its returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha_x: f64,
    pub hurst_x: f64,
    pub hurst_s: f64,
    pub rep_index: usize,
    pub hurst_r: f64,
    pub r2: f64,
    pub seed: u64,
    pub runtime_ms: u64,
}

impl SweepRecord {
    pub fn get(&self, variable: Variable) -> f64 {
        match variable {
            Variable::AlphaX => self.alpha_x,
            Variable::HurstX => self.hurst_x,
            Variable::HurstS => self.hurst_s,
        }
    }
}

/// Independent variables of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    AlphaX,
    HurstX,
    HurstS,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::AlphaX, Variable::HurstX, Variable::HurstS];

    pub fn name(self) -> &'static str {
        match self {
            Variable::AlphaX => "alpha_x",
            Variable::HurstX => "hurst_x",
            Variable::HurstS => "hurst_s",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown variable {s:?}")))
    }
}

// ---------------------------------------------------------------------------
// Cell statistics

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub alpha_x: f64,
    pub hurst_x: f64,
    pub hurst_s: f64,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl CellStats {
    /// Mean to two decimals with the standard deviation times 100 in
    /// parentheses, e.g. `0.46(1)`.
    pub fn table_entry(&self) -> String {
        format!("{:.2}({:.0})", self.mean, self.std * 100.0)
    }
}

/// Key that orders cells by `(alpha_x, hurst_s, hurst_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey([OrderedF64; 3]);

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn group_cells(records: &[SweepRecord]) -> BTreeMap<CellKey, Vec<f64>> {
    let mut cells: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in records {
        let key = CellKey([OrderedF64(r.alpha_x), OrderedF64(r.hurst_s), OrderedF64(r.hurst_x)]);
        cells.entry(key).or_default().push(r.hurst_r);
    }
    cells
}

/// Two-pass mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean and standard deviation of `H_r` per `(alpha_x, H_x, H_s)` cell,
/// ordered by `alpha_x`, then `H_s`, then `H_x`.
pub fn cell_stats(records: &[SweepRecord]) -> Result<Vec<CellStats>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no sweep records".into()));
    }
    group_cells(records)
        .into_iter()
        .map(|(CellKey([a, hs, hx]), values)| {
            if values.len() < 2 {
                return Err(Error::InsufficientReps {
                    alpha_x: a.0,
                    hurst_x: hx.0,
                    hurst_s: hs.0,
                    reps: values.len(),
                });
            }
            let (mean, std) = mean_std(&values);
            Ok(CellStats {
                alpha_x: a.0,
                hurst_x: hx.0,
                hurst_s: hs.0,
                reps: values.len(),
                mean,
                std,
            })
        })
        .collect()
}

/// One record per cell carrying the cell mean of `H_r`; the remaining
/// fields are taken from the first record of the cell.
pub fn cell_mean_records(records: &[SweepRecord]) -> Vec<SweepRecord> {
    let mut firsts: BTreeMap<CellKey, SweepRecord> = BTreeMap::new();
    for r in records {
        let key = CellKey([OrderedF64(r.alpha_x), OrderedF64(r.hurst_s), OrderedF64(r.hurst_x)]);
        firsts.entry(key).or_insert(*r);
    }
    group_cells(records)
        .into_iter()
        .map(|(key, values)| {
            let mut rec = firsts[&key];
            rec.hurst_r = values.iter().sum::<f64>() / values.len() as f64;
            rec
        })
        .collect()
}

/// Mean(std) grid at one `alpha_x`: rows are `H_s`, columns `H_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub alpha_x: f64,
    pub hurst_s: Vec<f64>,
    pub hurst_x: Vec<f64>,
    /// `cells[row][col]`, absent when the cell has no statistics.
    pub cells: Vec<Vec<Option<CellStats>>>,
}

impl CellTable {
    /// One table per distinct `alpha_x` present in `stats`.
    pub fn from_stats(stats: &[CellStats]) -> Vec<CellTable> {
        let distinct = |f: fn(&CellStats) -> f64, subset: &[&CellStats]| {
            let mut v: Vec<f64> = subset.iter().map(|s| f(s)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let all: Vec<&CellStats> = stats.iter().collect();
        distinct(|s| s.alpha_x, &all)
            .into_iter()
            .map(|alpha| {
                let subset: Vec<&CellStats> = stats.iter().filter(|s| s.alpha_x == alpha).collect();
                let rows = distinct(|s| s.hurst_s, &subset);
                let cols = distinct(|s| s.hurst_x, &subset);
                let cells = rows
                    .iter()
                    .map(|&hs| {
                        cols.iter()
                            .map(|&hx| {
                                subset
                                    .iter()
                                    .find(|s| s.hurst_s == hs && s.hurst_x == hx)
                                    .map(|s| **s)
                            })
                            .collect()
                    })
                    .collect();
                CellTable {
                    alpha_x: alpha,
                    hurst_s: rows,
                    hurst_x: cols,
                    cells,
                }
            })
            .collect()
    }
}

impl fmt::Display for CellTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha_x = {:.2}; rows H_s, columns H_x", self.alpha_x)?;
        write!(f, "{:>6}", "")?;
        for hx in &self.hurst_x {
            write!(f, " {:>8.2}", hx)?;
        }
        writeln!(f)?;
        for (hs, row) in self.hurst_s.iter().zip(&self.cells) {
            write!(f, "{:>6.2}", hs)?;
            for cell in row {
                match cell {
                    Some(c) => write!(f, " {:>8}", c.table_entry())?,
                    None => write!(f, " {:>8}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Correlation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub variable: Variable,
    pub rho: f64,
    /// Two-sided p-value of the t-transform with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

impl Correlation {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

/// Sample Pearson coefficient of `H_r` against one parameter, pooling all
/// records and ignoring the other parameters.
pub fn pearson(records: &[SweepRecord], variable: Variable) -> Result<Correlation> {
    let xs: Vec<f64> = records.iter().map(|r| r.get(variable)).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.hurst_r).collect();
    let rho = pearson_columns(&xs, &ys, variable.name())?;
    let n = records.len();
    Ok(Correlation {
        variable,
        rho,
        p_value: correlation_p_value(rho, n),
        n,
    })
}

/// Sample Pearson coefficient of two equal-length columns.
pub fn pearson_columns(xs: &[f64], ys: &[f64], x_name: &'static str) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "column lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 records, got {}",
            xs.len()
        )));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(xs) {
        return Err(Error::DegenerateVariance(x_name));
    }
    if constant(ys) {
        return Err(Error::DegenerateVariance("hurst_r"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance(x_name));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance("hurst_r"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn correlation_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return f64::NAN;
    }
    let dof = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    two_sided_t(rho * (dof / denom).sqrt(), dof)
}

fn two_sided_t(t: f64, dof: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    match StudentsT::new(0.0, 1.0, dof) {
        Ok(dist) => (2.0 * dist.sf(t.abs())).min(1.0),
        Err(_) => f64::NAN,
    }
}

// ---------------------------------------------------------------------------
// Regression

/// Model families fitted with an intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelForm {
    /// `H_x`, `H_s` at a single `alpha_x`.
    Linear2,
    /// `H_x`, `H_s`, `H_s^2`, `H_s^3` at a single `alpha_x`.
    CubicS2,
    /// `alpha_x`, `H_x`, `H_s`.
    Linear3,
    /// `alpha_x`, `H_x`, `H_s`, `H_s^2`, `H_s^3`.
    CubicS3,
}

impl ModelForm {
    pub const ALL: [ModelForm; 4] = [ModelForm::Linear2, ModelForm::CubicS2, ModelForm::Linear3, ModelForm::CubicS3];

    pub fn name(self) -> &'static str {
        match self {
            ModelForm::Linear2 => "linear2",
            ModelForm::CubicS2 => "cubic_s2",
            ModelForm::Linear3 => "linear3",
            ModelForm::CubicS3 => "cubic_s3",
        }
    }

    /// Term names, intercept first.
    pub fn terms(self) -> &'static [&'static str] {
        match self {
            ModelForm::Linear2 => &["intercept", "hurst_x", "hurst_s"],
            ModelForm::CubicS2 => &["intercept", "hurst_x", "hurst_s", "hurst_s^2", "hurst_s^3"],
            ModelForm::Linear3 => &["intercept", "alpha_x", "hurst_x", "hurst_s"],
            ModelForm::CubicS3 => &["intercept", "alpha_x", "hurst_x", "hurst_s", "hurst_s^2", "hurst_s^3"],
        }
    }

    pub fn has_alpha(self) -> bool {
        matches!(self, ModelForm::Linear3 | ModelForm::CubicS3)
    }

    pub fn is_cubic(self) -> bool {
        matches!(self, ModelForm::CubicS2 | ModelForm::CubicS3)
    }

    /// Design-matrix row for one parameter point.
    pub fn row(self, alpha_x: f64, hurst_x: f64, hurst_s: f64) -> Vec<f64> {
        let mut row = vec![1.0];
        if self.has_alpha() {
            row.push(alpha_x);
        }
        row.push(hurst_x);
        row.push(hurst_s);
        if self.is_cubic() {
            row.push(hurst_s * hurst_s);
            row.push(hurst_s * hurst_s * hurst_s);
        }
        row
    }
}

impl fmt::Display for ModelForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelForm::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model form {s:?}")))
    }
}

/// Whether a regression is fitted on individual runs or on cell means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    PerRun,
    CellMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub form: ModelForm,
    pub mode: FitMode,
    pub terms: Vec<Term>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub residual_std: f64,
    pub n: usize,
}

impl RegressionReport {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.coefficient)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    /// Fitted `H_r` at one parameter point.
    pub fn predict(&self, alpha_x: f64, hurst_x: f64, hurst_s: f64) -> f64 {
        self.form
            .row(alpha_x, hurst_x, hurst_s)
            .iter()
            .zip(&self.terms)
            .map(|(x, t)| x * t.coefficient)
            .sum()
    }

    /// True when every coefficient is significant at [`SIGNIFICANCE_LEVEL`].
    pub fn all_significant(&self) -> bool {
        self.terms.iter().all(|t| t.p_value < SIGNIFICANCE_LEVEL)
    }
}

impl fmt::Display for RegressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            FitMode::PerRun => "per-run records",
            FitMode::CellMeans => "cell means",
        };
        writeln!(
            f,
            "{} ({mode}, n = {}): adj. R^2 = {:.4}, R^2 = {:.4}",
            self.form, self.n, self.adjusted_r2, self.r2
        )?;
        for t in &self.terms {
            writeln!(
                f,
                "  {:<10} {:>10.4} (se {:.4}, p {:.2e})",
                t.name, t.coefficient, t.std_error, t.p_value
            )?;
        }
        Ok(())
    }
}

/// Fit `form` on per-run records.
pub fn ols(records: &[SweepRecord], form: ModelForm) -> Result<RegressionReport> {
    ols_with_mode(records, form, FitMode::PerRun)
}

/// Fit `form` on per-run records or on cell means.
pub fn ols_with_mode(records: &[SweepRecord], form: ModelForm, mode: FitMode) -> Result<RegressionReport> {
    let rows = match mode {
        FitMode::PerRun => records.to_vec(),
        FitMode::CellMeans => cell_mean_records(records),
    };
    let terms = form.terms();
    let p = terms.len();
    let n = rows.len();
    if n < p + 10 {
        return Err(Error::InsufficientData(format!(
            "{form} needs at least {} observations, got {n}",
            p + 10
        )));
    }

    let distinct = |v: Variable| {
        let mut xs: Vec<f64> = rows.iter().map(|r| r.get(v)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    };
    if !form.has_alpha() && distinct(Variable::AlphaX) > 1 {
        return Err(Error::InvalidParameter(format!(
            "{form} is fitted at a single alpha_x; records span {} values",
            distinct(Variable::AlphaX)
        )));
    }
    for v in Variable::ALL {
        if (v != Variable::AlphaX || form.has_alpha()) && distinct(v) < 2 {
            return Err(Error::InsufficientData(format!("{v} takes a single value")));
        }
    }

    let x = DMatrix::from_fn(n, p, |i, j| {
        let r = &rows[i];
        form.row(r.alpha_x, r.hurst_x, r.hurst_s)[j]
    });
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.hurst_r));
    let fit = least_squares(&x, &y).ok_or_else(|| Error::RankDeficient(form.name().into()))?;

    let mean_y = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let dof = (n - p) as f64;
    let sigma2 = fit.rss / dof;
    let (r2, adjusted_r2) = if tss > 0.0 {
        (1.0 - fit.rss / tss, 1.0 - sigma2 / (tss / (n - 1) as f64))
    } else {
        (f64::NAN, f64::NAN)
    };

    let terms = terms
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let coefficient = fit.beta[j];
            let std_error = (sigma2 * fit.xtx_inv_diag[j]).sqrt();
            let p_value = if std_error > 0.0 {
                two_sided_t(coefficient / std_error, dof)
            } else if coefficient != 0.0 {
                0.0
            } else {
                1.0
            };
            Term {
                name: (*name).to_string(),
                coefficient,
                std_error,
                p_value,
            }
        })
        .collect();

    Ok(RegressionReport {
        form,
        mode,
        terms,
        r2,
        adjusted_r2,
        residual_std: sigma2.sqrt(),
        n,
    })
}

struct LeastSquares {
    beta: DVector<f64>,
    rss: f64,
    /// Diagonal of `(X'X)^-1`.
    xtx_inv_diag: Vec<f64>,
}

/// Householder QR solve; `None` when a pivot of `R` is negligible relative
/// to the largest one.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<LeastSquares> {
    let p = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let max_pivot = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_pivot == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * max_pivot) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let beta = r.solve_upper_triangular(&qty)?;
    let resid = y - x * &beta;
    let rss = resid.dot(&resid);
    // (X'X)^-1 = R^-1 R^-T; its diagonal is the squared row norms of R^-1.
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p))?;
    let xtx_inv_diag = (0..p).map(|i| r_inv.row(i).norm_squared()).collect();
    Some(LeastSquares {
        beta,
        rss,
        xtx_inv_diag,
    })
}

/// Change of fitted `H_r` when `variable` moves by `delta`, other variables
/// fixed. Defined only where the variable enters linearly.
pub fn sensitivity(report: &RegressionReport, variable: Variable, delta: f64) -> Result<f64> {
    let not_linear = || Error::VariableNotInModel {
        variable: variable.name().into(),
        model: report.form.name().into(),
    };
    if variable == Variable::HurstS && report.form.is_cubic() {
        return Err(not_linear());
    }
    let coef = report.coefficient(variable.name()).ok_or_else(not_linear)?;
    Ok(coef * delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alpha_x: f64, hurst_x: f64, hurst_s: f64, hurst_r: f64) -> SweepRecord {
        SweepRecord {
            alpha_x,
            hurst_x,
            hurst_s,
            rep_index: 0,
            hurst_r,
            r2: 1.0,
            seed: 0,
            runtime_ms: 0,
        }
    }

    fn grid(f: impl Fn(f64, f64, f64) -> f64, alphas: &[f64]) -> Vec<SweepRecord> {
        let hs = [0.5, 0.6, 0.7, 0.8, 0.9];
        let mut out = Vec::new();
        for &a in alphas {
            for &s in &hs {
                for &x in &hs {
                    out.push(rec(a, x, s, f(a, x, s)));
                }
            }
        }
        out
    }

    #[test]
    fn cell_entry_formats_like_the_table() {
        let stats = cell_stats(&[rec(1.3, 0.5, 0.5, 0.46), rec(1.3, 0.5, 0.5, 0.46)]).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].mean, 0.46);
        assert_eq!(stats[0].std, 0.0);
        assert_eq!(stats[0].table_entry(), "0.46(0)");

        let stats = cell_stats(&[rec(1.3, 0.5, 0.5, 0.45), rec(1.3, 0.5, 0.5, 0.47)]).unwrap();
        // sd = 0.01414...
        assert_eq!(stats[0].table_entry(), "0.46(1)");
    }

    #[test]
    fn single_rep_cell_is_rejected() {
        let err = cell_stats(&[rec(1.3, 0.5, 0.5, 0.46)]).unwrap_err();
        assert!(matches!(err, Error::InsufficientReps { reps: 1, .. }));
        assert!(matches!(cell_stats(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn table_orientation_rows_are_hurst_s() {
        let recs: Vec<_> = grid(|_, x, s| s - x / 10.0, &[1.3])
            .into_iter()
            .flat_map(|r| [r, r])
            .collect();
        let tables = CellTable::from_stats(&cell_stats(&recs).unwrap());
        assert_eq!(tables.len(), 1);
        let t = &tables[0];
        let first_row = t.cells[0].iter().map(|c| c.unwrap().hurst_s).collect::<Vec<_>>();
        assert!(first_row.iter().all(|&s| s == 0.5));
        assert_eq!(t.cells[4][0].unwrap().hurst_x, 0.5);
        assert_eq!(t.cells[4][0].unwrap().hurst_s, 0.9);
    }

    #[test]
    fn pearson_identity_and_degenerate() {
        let recs: Vec<_> = [0.5, 0.6, 0.7, 0.8].iter().map(|&s| rec(1.3, 0.5, s, s)).collect();
        let c = pearson(&recs, Variable::HurstS).unwrap();
        assert_eq!(c.rho, 1.0);
        assert_eq!(c.p_value, 0.0);

        let flat: Vec<_> = [0.5, 0.6, 0.7].iter().map(|&s| rec(1.3, 0.5, s, 0.4)).collect();
        assert!(matches!(pearson(&flat, Variable::HurstS), Err(Error::DegenerateVariance("hurst_r"))));
        assert!(matches!(pearson(&flat, Variable::AlphaX), Err(Error::DegenerateVariance("alpha_x"))));
        assert!(matches!(pearson(&flat[..2], Variable::HurstS), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pearson_p_value_matches_reference() {
        // r = 0.5, n = 12: t = 0.5 * sqrt(10 / 0.75) = 1.8257, two-sided p = 0.0979
        let p = correlation_p_value(0.5, 12);
        assert!((p - 0.097_89).abs() < 5e-5, "{p}");
    }

    #[test]
    fn linear2_recovers_noiseless_coefficients() {
        let recs = grid(|_, x, s| 0.23 - 0.08 * x + 0.52 * s, &[1.3]);
        let rep = ols(&recs, ModelForm::Linear2).unwrap();
        for (got, want) in rep.coefficients().iter().zip([0.23, -0.08, 0.52]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert!((rep.adjusted_r2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linear3_prediction_at_typical_stock() {
        let recs = grid(|a, x, s| 0.25 - 0.02 * a - 0.08 * x + 0.52 * s, &[1.0, 1.3, 1.6]);
        let rep = ols(&recs, ModelForm::Linear3).unwrap();
        let h = rep.predict(1.3, 0.80, 0.75);
        assert!((h - 0.55).abs() < 0.005, "{h}");
        assert!((sensitivity(&rep, Variable::AlphaX, 1.0).unwrap() + 0.02).abs() < 1e-10);
        assert!((sensitivity(&rep, Variable::HurstS, 0.2).unwrap() - 0.104).abs() < 1e-10);
        assert_eq!(sensitivity(&rep, Variable::HurstX, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sensitivity_rejects_missing_and_nonlinear_terms() {
        let recs = grid(|_, x, s| 0.23 - 0.08 * x + 0.52 * s, &[1.3]);
        let lin2 = ols(&recs, ModelForm::Linear2).unwrap();
        assert!(matches!(
            sensitivity(&lin2, Variable::AlphaX, 1.0),
            Err(Error::VariableNotInModel { .. })
        ));
        let cubic = ols(&recs, ModelForm::CubicS2).unwrap();
        assert!(matches!(
            sensitivity(&cubic, Variable::HurstS, 1.0),
            Err(Error::VariableNotInModel { .. })
        ));
        assert!(sensitivity(&cubic, Variable::HurstX, 1.0).is_ok());
    }

    #[test]
    fn rank_deficiency_and_size_checks() {
        // Hurst_x duplicated as alpha_x makes the design collinear.
        let recs: Vec<_> = grid(|_, x, s| x + s, &[1.3])
            .into_iter()
            .map(|mut r| {
                r.alpha_x = 2.0 * r.hurst_x;
                r
            })
            .collect();
        assert!(matches!(ols(&recs, ModelForm::Linear3), Err(Error::RankDeficient(_))));

        let few = &grid(|_, x, s| x + s, &[1.3])[..12];
        assert!(matches!(ols(few, ModelForm::Linear2), Err(Error::InsufficientData(_))));

        let two_alpha = grid(|_, x, s| x + s, &[1.0, 1.3]);
        assert!(matches!(ols(&two_alpha, ModelForm::Linear2), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cell_mean_mode_averages_replicates() {
        let mut recs = grid(|_, x, s| 0.23 - 0.08 * x + 0.52 * s, &[1.3]);
        let noisy: Vec<_> = recs
            .iter()
            .flat_map(|r| {
                let mut lo = *r;
                let mut hi = *r;
                lo.hurst_r -= 0.01;
                hi.hurst_r += 0.01;
                [lo, hi]
            })
            .collect();
        recs.sort_by(|a, b| a.hurst_s.total_cmp(&b.hurst_s).then(a.hurst_x.total_cmp(&b.hurst_x)));
        let means = cell_mean_records(&noisy);
        assert_eq!(means.len(), recs.len());
        for (m, r) in means.iter().zip(&recs) {
            assert!((m.hurst_r - r.hurst_r).abs() < 1e-15);
        }
        let rep = ols_with_mode(&noisy, ModelForm::Linear2, FitMode::CellMeans).unwrap();
        assert_eq!(rep.n, 25);
        assert!((rep.coefficient("hurst_s").unwrap() - 0.52).abs() < 1e-10);
    }
}
