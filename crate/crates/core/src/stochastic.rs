//! Input streams of the order-flow model.
//!
//! * order directions: signs of fractional Gaussian noise with Hurst `H_s`;
//! * relative prices: Student-t draws (tail index `alpha_x`) re-ordered by
//!   IAAFT so that their power spectrum follows fGn with Hurst `H_x`.
//!
//! fGn is synthesized exactly by circulant embedding of its autocovariance.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use realfft::{RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated negative eigenvalue of the circulant embedding,
/// relative to the largest eigenvalue.
const EIGEN_TOLERANCE: f64 = 1e-10;

/// Default IAAFT iteration budget.
pub const DEFAULT_IAAFT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FgnSample {
    pub values: Vec<f64>,
    pub hurst: f64,
}

/// Buy/sell directions, `+1` for buy and `-1` for sell.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSeries {
    pub values: Vec<i8>,
    pub target_hurst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativePriceSeries {
    /// Relative prices in log-price units.
    pub values: Vec<f64>,
    pub tail_index: f64,
    pub target_hurst: f64,
    pub iaaft: IaaftReport,
}

/// Convergence diagnostics of one IAAFT run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IaaftReport {
    pub iterations: usize,
    /// True when the rank permutation stopped changing before the budget ran out.
    pub converged: bool,
    /// Relative RMS distance between the normalized amplitude spectra of the
    /// surrogate and the spectrum source, DC term excluded.
    pub spectrum_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub values: Vec<f64>,
    pub report: IaaftReport,
}

/// Autocovariance of unit-variance fGn at integer lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

/// `n` samples of zero-mean, unit-variance fractional Gaussian noise.
pub fn generate_fgn<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Result<FgnSample> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("fGn length must be >= 2, got {n}")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidParameter(format!("Hurst index must lie in (0, 1), got {hurst}")));
    }

    // First row of the circulant embedding; m is the smallest power of two
    // with m >= 2(n - 1).
    let m = (2 * (n - 1)).next_power_of_two();
    let half = m / 2;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex::new(fgn_autocovariance(lag, hurst), 0.0)
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let max_eigen = row.iter().map(|c| c.re).fold(0.0_f64, f64::max);
    let eigen: Vec<f64> = row
        .iter()
        .map(|c| {
            if c.re < -EIGEN_TOLERANCE * max_eigen.max(1.0) {
                Err(Error::NumericFailure(format!(
                    "circulant embedding eigenvalue {} is negative (H = {hurst}, n = {n})",
                    c.re
                )))
            } else {
                Ok(c.re.max(0.0))
            }
        })
        .collect::<Result<_>>()?;

    let mf = m as f64;
    let mut w = vec![Complex::new(0.0, 0.0); m];
    w[0] = Complex::new((eigen[0] / mf).sqrt() * normal(rng), 0.0);
    w[half] = Complex::new((eigen[half] / mf).sqrt() * normal(rng), 0.0);
    for k in 1..half {
        let scale = (eigen[k] / (2.0 * mf)).sqrt();
        let z = Complex::new(scale * normal(rng), scale * normal(rng));
        w[k] = z;
        w[m - k] = z.conj();
    }
    fft.process(&mut w);

    Ok(FgnSample {
        values: w[..n].iter().map(|c| c.re).collect(),
        hurst,
    })
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Buy (+1) where the noise is nonnegative, sell (-1) otherwise.
pub fn signs_from_fgn(fgn: &FgnSample) -> Result<SignSeries> {
    if fgn.values.is_empty() {
        return Err(Error::EmptyInput("fGn sample for sign series".into()));
    }
    Ok(SignSeries {
        values: fgn.values.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect(),
        target_hurst: fgn.hurst,
    })
}

/// `n` i.i.d. draws from a standard (location 0, unit scale) Student-t law.
pub fn sample_student_t<R: Rng + ?Sized>(n: usize, dof: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("Student-t sample size must be >= 1".into()));
    }
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(Error::InvalidParameter(format!("degrees of freedom must be > 0, got {dof}")));
    }
    let dist = StudentT::new(dof).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// Iterative amplitude adjusted Fourier transform.
///
/// Starting from `amplitudes` in the order given, alternately imposes the
/// amplitude spectrum of `spectrum_source` and then restores the exact
/// marginal by rank-ordering `amplitudes`. Stops once the rank permutation
/// is unchanged between successive iterations, or after `max_iter`
/// iterations. The last step is always the rank step, so the output is an
/// exact permutation of `amplitudes`.
pub fn iaaft(amplitudes: &[f64], spectrum_source: &FgnSample, max_iter: usize) -> Result<Surrogate> {
    let n = amplitudes.len();
    if n != spectrum_source.values.len() {
        return Err(Error::InvalidParameter(format!(
            "amplitude length {n} differs from spectrum source length {}",
            spectrum_source.values.len()
        )));
    }
    if n < 4 {
        return Err(Error::InvalidParameter(format!("IAAFT needs at least 4 points, got {n}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("IAAFT max_iter must be >= 1".into()));
    }
    if let Some(bad) = amplitudes.iter().chain(&spectrum_source.values).find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite IAAFT input {bad}")));
    }

    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut spectrum = forward.make_output_vec();
    let mut scratch = forward.make_input_vec();

    let mut sorted = amplitudes.to_vec();
    sorted.sort_by(f64::total_cmp);

    scratch.copy_from_slice(&spectrum_source.values);
    forward
        .process(&mut scratch, &mut spectrum)
        .map_err(|e| Error::NumericFailure(e.to_string()))?;
    let target: Vec<f64> = spectrum.iter().map(|c| c.norm()).collect();

    let mut current = amplitudes.to_vec();
    let mut order = argsort(&current);
    let mut next_order: Vec<u32> = Vec::with_capacity(n);
    let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;

        scratch.copy_from_slice(&current);
        forward
            .process(&mut scratch, &mut spectrum)
            .map_err(|e| Error::NumericFailure(e.to_string()))?;
        for (c, &mag) in spectrum.iter_mut().zip(&target) {
            let norm = c.norm();
            *c = if norm > 0.0 {
                *c * (mag / norm)
            } else {
                Complex::new(mag, 0.0)
            };
        }
        // DC and (for even n) Nyquist bins of a real signal are real.
        spectrum[0].im = 0.0;
        if n.is_multiple_of(2) {
            spectrum[n / 2].im = 0.0;
        }
        inverse
            .process(&mut spectrum, &mut scratch)
            .map_err(|e| Error::NumericFailure(e.to_string()))?;

        argsort_into(&scratch, &mut keyed, &mut next_order);
        for (&idx, &value) in next_order.iter().zip(&sorted) {
            current[idx as usize] = value;
        }
        let unchanged = next_order == order;
        std::mem::swap(&mut order, &mut next_order);
        if unchanged {
            converged = true;
            break;
        }
    }

    let spectrum_mismatch = spectrum_distance(&current, &target, forward.as_ref())?;
    Ok(Surrogate {
        values: current,
        report: IaaftReport {
            iterations,
            converged,
            spectrum_mismatch,
        },
    })
}

impl RelativePriceSeries {
    /// Student-t amplitudes drawn from `amplitude_rng`, reordered by IAAFT
    /// towards an fGn spectrum drawn from `spectrum_rng`.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        tail_index: f64,
        target_hurst: f64,
        max_iter: usize,
        amplitude_rng: &mut R,
        spectrum_rng: &mut R,
    ) -> Result<Self> {
        let amplitudes = sample_student_t(n, tail_index, amplitude_rng)?;
        let source = generate_fgn(n, target_hurst, spectrum_rng)?;
        let surrogate = iaaft(&amplitudes, &source, max_iter)?;
        Ok(Self {
            values: surrogate.values,
            tail_index,
            target_hurst,
            iaaft: surrogate.report,
        })
    }
}

fn argsort(values: &[f64]) -> Vec<u32> {
    let mut keyed = Vec::with_capacity(values.len());
    let mut idx = Vec::with_capacity(values.len());
    argsort_into(values, &mut keyed, &mut idx);
    idx
}

/// Indices that sort `values` ascending, ties broken by index.
fn argsort_into(values: &[f64], keyed: &mut Vec<(f64, u32)>, idx: &mut Vec<u32>) {
    keyed.clear();
    keyed.extend(values.iter().enumerate().map(|(i, &v)| (v, i as u32)));
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.clear();
    idx.extend(keyed.iter().map(|&(_, i)| i));
}

fn spectrum_distance(series: &[f64], target: &[f64], fft: &dyn RealToComplex<f64>) -> Result<f64> {
    let mut input = series.to_vec();
    let mut spectrum = fft.make_output_vec();
    fft.process(&mut input, &mut spectrum)
        .map_err(|e| Error::NumericFailure(e.to_string()))?;
    let got: Vec<f64> = spectrum[1..].iter().map(|c| c.norm()).collect();
    let want = &target[1..];
    let norm_got = got.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_want = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_got == 0.0 || norm_want == 0.0 {
        return Ok(0.0);
    }
    Ok(got
        .iter()
        .zip(want)
        .map(|(g, w)| (g / norm_got - w / norm_want).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn lag_autocorrelation(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let cov: f64 = x.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum();
        cov / var
    }

    #[test]
    fn autocovariance_at_half_is_white() {
        assert_eq!(fgn_autocovariance(0, 0.5), 1.0);
        for k in 1..20 {
            assert!(fgn_autocovariance(k, 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn white_fgn_has_no_lag_one_correlation() {
        let fgn = generate_fgn(4096, 0.5, &mut seeded(1)).unwrap();
        assert_eq!(fgn.values.len(), 4096);
        assert!(lag_autocorrelation(&fgn.values, 1).abs() < 0.05);
    }

    #[test]
    fn fgn_rejects_bad_parameters() {
        assert!(matches!(generate_fgn(1, 0.8, &mut seeded(1)), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_fgn(100, 1.0, &mut seeded(1)), Err(Error::InvalidParameter(_))));
        assert!(matches!(generate_fgn(100, 0.0, &mut seeded(1)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn fgn_smallest_length() {
        let fgn = generate_fgn(2, 0.9, &mut seeded(5)).unwrap();
        assert_eq!(fgn.values.len(), 2);
    }

    #[test]
    fn fgn_is_deterministic() {
        let a = generate_fgn(1000, 0.7, &mut seeded(3)).unwrap();
        let b = generate_fgn(1000, 0.7, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fgn_mean_within_five_sigma() {
        // Var(mean of n fGn samples) = n^(2H - 2).
        for &h in &[0.5, 0.75, 0.9] {
            let n = 10_000;
            let fgn = generate_fgn(n, h, &mut seeded(17)).unwrap();
            let mean = fgn.values.iter().sum::<f64>() / n as f64;
            let sigma = (n as f64).powf(h - 1.0);
            assert!(mean.abs() < 5.0 * sigma, "H={h} mean={mean} sigma={sigma}");
        }
    }

    #[test]
    fn signs_threshold_at_zero() {
        let fgn = FgnSample { values: vec![0.3, -0.1, 0.0], hurst: 0.7 };
        let s = signs_from_fgn(&fgn).unwrap();
        assert_eq!(s.values, vec![1, -1, 1]);
        assert_eq!(s.target_hurst, 0.7);

        let neg = FgnSample { values: vec![-1.0, -0.5, -2.0], hurst: 0.6 };
        assert_eq!(signs_from_fgn(&neg).unwrap().values, vec![-1, -1, -1]);

        let empty = FgnSample { values: vec![], hurst: 0.6 };
        assert!(signs_from_fgn(&empty).is_err());
    }

    #[test]
    fn student_t_near_normal_for_large_dof() {
        let x = sample_student_t(100_000, 1000.0, &mut seeded(9)).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.97..=1.03).contains(&sd), "sd = {sd}");
    }

    #[test]
    fn student_t_rejects_bad_parameters() {
        assert!(sample_student_t(0, 1.3, &mut seeded(1)).is_err());
        assert!(sample_student_t(10, 0.0, &mut seeded(1)).is_err());
        assert!(sample_student_t(10, -1.0, &mut seeded(1)).is_err());
    }

    #[test]
    fn iaaft_fixed_point_converges_in_one_iteration() {
        let source = generate_fgn(512, 0.8, &mut seeded(21)).unwrap();
        let out = iaaft(&source.values, &source, 50).unwrap();
        assert_eq!(out.report.iterations, 1);
        assert!(out.report.converged);
        assert_eq!(out.values, source.values);
        assert!(out.report.spectrum_mismatch < 1e-12);
    }

    #[test]
    fn iaaft_preserves_marginal_exactly() {
        let amps = sample_student_t(4096, 1.3, &mut seeded(2)).unwrap();
        let source = generate_fgn(4096, 0.8, &mut seeded(3)).unwrap();
        let out = iaaft(&amps, &source, 100).unwrap();
        let mut a = amps.clone();
        let mut b = out.values.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert!(out.report.iterations >= 1 && out.report.iterations <= 100);
    }

    #[test]
    fn iaaft_rejects_bad_parameters() {
        let source = generate_fgn(8, 0.8, &mut seeded(3)).unwrap();
        let amps = vec![1.0; 8];
        assert!(iaaft(&amps, &source, 0).is_err());
        assert!(iaaft(&amps[..7], &source, 10).is_err());
        let tiny = FgnSample { values: vec![0.0; 3], hurst: 0.8 };
        assert!(iaaft(&[1.0, 2.0, 3.0], &tiny, 10).is_err());
    }
}
