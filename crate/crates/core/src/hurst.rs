//! Detrended fluctuation analysis with linear (order-1) detrending.
//!
//! The series is mean-subtracted and integrated into a profile. For each
//! segment size `l` the profile is cut into `floor(N / l)` disjoint segments
//! starting from the front and, in [`Segmentation::BothEnds`] mode, another
//! `floor(N / l)` starting from the back, so the tail is never discarded. A
//! least-squares line is removed from every segment and `F(l)` is the RMS of
//! the pooled residuals. The Hurst estimate is the OLS slope of `ln F(l)`
//! on `ln l` inside the fit range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound (inclusive) of the default scaling range.
pub const DEFAULT_MIN_SCALE: usize = 10;
/// Upper bound (exclusive) of the default scaling range.
pub const DEFAULT_MAX_SCALE: usize = 4500;
/// Density of the default logarithmic scale grid.
pub const SCALES_PER_DECADE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Segmentation {
    #[default]
    BothEnds,
    ForwardOnly,
}

/// Half-open range `[min, max_exclusive)` of scales entering the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitRange {
    pub min: usize,
    pub max_exclusive: usize,
}

impl Default for FitRange {
    fn default() -> Self {
        Self {
            min: DEFAULT_MIN_SCALE,
            max_exclusive: DEFAULT_MAX_SCALE,
        }
    }
}

impl FitRange {
    pub fn contains(&self, scale: usize) -> bool {
        scale >= self.min && scale < self.max_exclusive
    }
}

/// `F(l)` over a set of segment sizes, before any fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluctuation {
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfaResult {
    pub scales: Vec<usize>,
    pub fluctuations: Vec<f64>,
    pub hurst: f64,
    pub intercept: f64,
    pub fit_range: FitRange,
    pub r2: f64,
}

/// Log-spaced integer scales covering `[min, min(max_exclusive, N/4))`.
pub fn default_scales(series_len: usize, range: FitRange) -> Vec<usize> {
    let upper = range.max_exclusive.min(series_len / 4);
    let mut scales = Vec::new();
    let mut k = 0;
    loop {
        let s = (range.min as f64 * 10f64.powf(k as f64 / SCALES_PER_DECADE as f64)).round() as usize;
        if s >= upper {
            break;
        }
        if scales.last() != Some(&s) {
            scales.push(s);
        }
        k += 1;
    }
    scales
}

/// Fluctuation function of `series` at each of `scales`.
pub fn dfa(series: &[f64], scales: &[usize], mode: Segmentation) -> Result<Fluctuation> {
    let n = series.len();
    if n < 16 {
        return Err(Error::InvalidParameter(format!("DFA needs at least 16 points, got {n}")));
    }
    if scales.is_empty() {
        return Err(Error::InvalidParameter("no DFA scales given".into()));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("DFA scales must be strictly increasing".into()));
    }
    for &s in scales {
        if s < 4 {
            return Err(Error::InvalidParameter(format!("DFA scale {s} is below 4")));
        }
        if s > n / 4 {
            return Err(Error::InvalidParameter(format!("DFA scale {s} exceeds N/4 = {}", n / 4)));
        }
    }
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite value {bad} in series")));
    }

    let profile = profile(series);
    let mut fluctuations = Vec::with_capacity(scales.len());
    for &scale in scales {
        let segments = n / scale;
        let mut sum_sq = 0.0;
        for k in 0..segments {
            let start = k * scale;
            sum_sq += detrended_residual_ss(&profile[start..start + scale]);
        }
        let mut count = segments;
        if mode == Segmentation::BothEnds {
            for k in 0..segments {
                let end = n - k * scale;
                sum_sq += detrended_residual_ss(&profile[end - scale..end]);
            }
            count *= 2;
        }
        let f = (sum_sq / (count * scale) as f64).sqrt();
        if f.is_nan() || f <= 0.0 {
            return Err(Error::DegenerateSeries { scale });
        }
        fluctuations.push(f);
    }

    Ok(Fluctuation {
        scales: scales.to_vec(),
        fluctuations,
    })
}

/// OLS of `ln F` on `ln l` for scales inside `range`.
pub fn fit_hurst(fluct: &Fluctuation, range: FitRange) -> Result<DfaResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = fluct
        .scales
        .iter()
        .zip(&fluct.fluctuations)
        .filter(|(s, _)| range.contains(**s))
        .map(|(&s, &f)| ((s as f64).ln(), f.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientScales { found: xs.len() });
    }

    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(DfaResult {
        scales: fluct.scales.clone(),
        fluctuations: fluct.fluctuations.clone(),
        hurst: slope,
        intercept,
        fit_range: range,
        r2,
    })
}

/// DFA on the default log-spaced grid followed by the fit over `range`.
pub fn estimate_hurst(series: &[f64], range: FitRange, mode: Segmentation) -> Result<DfaResult> {
    let scales = default_scales(series.len(), range);
    if scales.len() < 3 {
        return Err(Error::InsufficientScales { found: scales.len() });
    }
    fit_hurst(&dfa(series, &scales, mode)?, range)
}

fn profile(series: &[f64]) -> Vec<f64> {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    series
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v - mean;
            Some(*acc)
        })
        .collect()
}

/// Residual sum of squares after removing the least-squares line.
pub(crate) fn detrended_residual_ss(segment: &[f64]) -> f64 {
    let len = segment.len() as f64;
    let x_mean = (len - 1.0) / 2.0;
    let y_mean = segment.iter().sum::<f64>() / len;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (j, &y) in segment.iter().enumerate() {
        let dx = j as f64 - x_mean;
        let dy = y - y_mean;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // sum (j - mean)^2 over 0..len
    let sxx = len * (len * len - 1.0) / 12.0;
    (syy - sxy * sxy / sxx).max(0.0)
}
